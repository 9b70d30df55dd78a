"""
Generated plotting scripts. The package itself does not import matplotlib;
each run writes small standalone scripts that read the CSV/JSON files of the
same run and save a PNG next to themselves.
"""

_PRELUDE = '''
import csv
import json
import os

import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))


def read_csv(name):
    with open(os.path.join(here, name)) as f:
        rows = [row for row in csv.reader(line for line in f if not line.startswith("#"))]
    header, body = rows[0], rows[1:]
    return {col: [row[i] for row in body] for i, col in enumerate(header)}


def read_json(name):
    with open(os.path.join(here, name)) as f:
        return json.load(f)

'''


def _script(header, body):
    return "\n".join(header) + "\n" + _PRELUDE + body.lstrip("\n")


def entropy_plot_script(header, csv_name, png_name, N, K, h_meas, h_ks, use_h_meas):
    """I[n] with the n ln K (or n h(P)) line, the h_KS reference slope and the 2 ln N saturation line."""
    body = '''
N, K, h_meas, h_ks = {N}, {K}, {h_meas!r}, {h_ks!r}
use_h_meas = {use_h_meas}
data = read_csv({csv_name!r})
n = np.array(data["n"], dtype=int)
I = np.array(data["I_n"], dtype=float)

plt.figure(figsize=(6, 4))
plt.plot(n, I, "-^", color="k", label="I[n]")
if use_h_meas:
    plt.plot(n, h_meas * n, "--", color="blue", label="n h(P)")
else:
    plt.plot(n, np.log(K) * n, "--", color="blue", label="n ln K")
if h_ks:
    n0 = min(2, len(n) - 1)
    plt.plot(n, I[n0] + h_ks * (n - n0), ":", color="red", label="slope h_KS")
plt.axhline(2 * np.log(N), color="gray", linestyle="-.", label="2 ln N")
plt.ylim(0, 2.2 * np.log(N))
plt.xlabel("n")
plt.ylabel("I[n] (nats)")
plt.title("N={{}}, K={{}}".format(N, K))
plt.legend()
plt.tight_layout()
plt.savefig(os.path.join(here, {png_name!r}), dpi=300)
'''.format(N=N, K=K, h_meas=h_meas, h_ks=h_ks, use_h_meas=bool(use_h_meas), csv_name=csv_name, png_name=png_name)
    return _script(header, body)


def correlations_plot_script(header, csv_name, fit_name, png_name):
    """|C[n]| samples, per-n median, long-time fit and its backward extrapolation, log scale."""
    body = '''
data = read_csv({csv_name!r})
n = np.array(data["n"], dtype=int)
absC = np.maximum(np.array(data["abs_C"], dtype=float), 1e-15)
fit = read_json({fit_name!r})

orders = np.unique(n)
medians = np.array([np.median(absC[n == k]) for k in orders])

plt.figure(figsize=(6, 4))
plt.semilogy(n, absC, ".", color="0.7", label="samples")
plt.semilogy(orders, medians, "o", color="k", label="median |C[n]|")
if fit.get("rate") is not None:
    plt.semilogy(orders, np.exp(fit["intercept"] - fit["rate"] * orders), "-", color="red",
                 label="fit, A={{:.2f}}".format(fit["A"]))
    plt.semilogy(orders, np.exp(-0.5 * fit["h_meas"] * orders), ":", color="blue", label="exp(-n h(P)/2)")
    plt.axvline(fit["breaking_time"], color="gray", linestyle="--", label="2 ln N / h(P)")
plt.xlabel("n")
plt.ylabel("|C[n]|")
plt.legend()
plt.tight_layout()
plt.savefig(os.path.join(here, {png_name!r}), dpi=300)
'''.format(csv_name=csv_name, fit_name=fit_name, png_name=png_name)
    return _script(header, body)


def rate_entropy_plot_script(header, json_name, png_name):
    body = '''
res = read_json({json_name!r})
h = np.array(res["h_meas"])
rates = np.array(res["rates"])

plt.figure(figsize=(5, 4))
plt.plot(h, rates, "o", color="k", label="fitted rate")
hh = np.linspace(0, 1.1 * h.max(), 50)
plt.plot(hh, hh / 2, ":", color="blue", label="A = 1")
if res.get("A") is not None:
    plt.plot(hh, res["A"] * hh / 2, "-", color="red", label="A = {{:.2f}}".format(res["A"]))
plt.xlabel("h(P) (nats)")
plt.ylabel("decay rate")
plt.legend()
plt.tight_layout()
plt.savefig(os.path.join(here, {png_name!r}), dpi=300)
'''.format(json_name=json_name, png_name=png_name)
    return _script(header, body)


def fstats_plot_script(header, csv_name, summary_name, png_name):
    body = '''
data = read_csv({csv_name!r})
m = np.array(data["m"], dtype=int)
mean_abs = np.array(data["mean_abs"], dtype=float)
rms = np.array(data["rms"], dtype=float)
summary = read_json({summary_name!r})

plt.figure(figsize=(6, 4))
plt.plot(m, mean_abs, ".", color="k", label="|<F(m, j)>|")
plt.plot(m, rms, "_", color="green", label="sqrt((1/N) Tr F^+F)")
plt.axhline(summary["prediction"], color="red", linestyle=":", label="exp(-h(P)/2)")
plt.xlabel("m")
plt.legend()
plt.tight_layout()
plt.savefig(os.path.join(here, {png_name!r}), dpi=300)
'''.format(csv_name=csv_name, summary_name=summary_name, png_name=png_name)
    return _script(header, body)
