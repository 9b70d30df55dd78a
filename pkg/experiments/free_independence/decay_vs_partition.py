import os
import joblib
import numpy as np
import matplotlib.pyplot as plt

from torusent.freeness import (sample_correlations, fit_decay, fit_rate_vs_entropy, f_variable_table,
                               exhaustive_low_order_check, independence_prediction)
from torusent.measurement import build_partition
from torusent.torus_maps import build_unitary

colors = {4: 'blue', 8: 'red', 16: 'green'}


def compute_decay(kind, N, spec, samples_per_n=32, extra_orders=10, seed=0):
    qmap = build_unitary(kind, N, seed=seed)
    P = build_partition(N, spec)
    n_max = int(np.floor(2 * np.log(N) / P.h_meas)) + extra_orders
    samples = sample_correlations(qmap, P, n_max, samples_per_n, seed=seed)
    return (kind, N, spec), (P, fit_decay(samples, P))


def print_results(results):

    print("-------------------------------------------------------------------------------------------")
    print("%-6s %4s  %-14s %7s  %8s  %8s  %8s  %12s"%("Map", "N", "Partition", "h(P)", "t_break", "rate", "A", "below_extrap"))
    for (kind, N, spec), (P, summary) in results.items():
        print("%-6s %4d  %-14s %7.3f  %8.2f  %8.4f  %4.2f+-%.2f  %12s"%(kind, N, spec, P.h_meas, summary.breaking_time,
              summary.rate, summary.A, summary.A_stderr, summary.below_extrapolation_fraction))


def plot_decay(results, kind, N, outfile):

    plt.figure(figsize=(10,5))
    for (k, n_dim, spec), (P, summary) in results.items():
        if k != kind or n_dim != N:
            continue
        orders = np.array(sorted(summary.per_n))
        medians = np.array([summary.per_n[n].median_log for n in orders])
        color = colors.get(P.K, 'gray')
        plt.plot(orders, medians, 'o', color=color, label="%s, A=%.2f"%(spec, summary.A))
        plt.plot(orders, summary.extrapolate(orders), '-', color=color)
        plt.plot(orders, np.log(independence_prediction(P, orders)), ':', color=color)
        plt.axvline(summary.breaking_time, color=color, linestyle='--', linewidth=0.5)
    plt.legend()
    plt.xlabel("n")
    plt.ylabel("median ln |C[n]|")
    plt.title("%s map, N=%d"%(kind, N))
    plt.savefig(outfile, dpi=300)
    plt.close()


outres = "results/free_independence"
if not os.path.isdir(outres):
    os.makedirs(outres)

specs = ['equal:4', 'equal:8', 'equal:16']
configs  = [('cat', N, spec) for N in [128, 256, 512] for spec in specs]
configs += [('haar', 256, spec) for spec in specs]

out = joblib.Parallel(n_jobs=-1, prefer="threads")(joblib.delayed(compute_decay)(kind, N, spec)
                                                   for kind, N, spec in configs)
results = dict(out)

print_results(results)

for kind, N in [('cat', 128), ('cat', 256), ('cat', 512), ('haar', 256)]:
    plot_decay(results, kind, N, "%s/decay_%s_N%d.png"%(outres, kind, N))

# Decay rate against h(P), one line per dimension
plt.figure(figsize=(6,5))
for N, marker in [(128, 'o'), (256, 's'), (512, '^')]:
    summaries = [results[('cat', N, spec)][1] for spec in specs]
    fit = fit_rate_vs_entropy(summaries)
    print("cat N=%4d: rate = (A/2) h(P) with A = %.3f +- %.3f"%(N, fit.A, fit.A_stderr))
    plt.plot(fit.h_meas, fit.rates, marker, color='k', label="N=%d, A=%.2f"%(N, fit.A))
hh = np.linspace(0, np.log(16) * 1.1, 50)
plt.plot(hh, hh / 2, ':', color='blue', label="A = 1")
plt.legend()
plt.xlabel("h(P)")
plt.ylabel("decay rate")
plt.savefig("%s/rate_vs_entropy.png"%outres, dpi=300)
plt.close()

# The F(m, j) statistics behind the ansatz
print("-------------------------------------------------------------------------------------------")
print("%-6s %4s  %-10s %-8s  %10s  %10s  %10s"%("Map", "N", "Partition", "Variant", "mean|<F>|", "rms", "exp(-h/2)"))
for N in [128, 256, 512]:
    for variant in ['P', 'Q']:
        P = build_partition(N, 'equal:4')
        table = f_variable_table(build_unitary('cat', N), P, 8, variant=variant)
        print("%-6s %4d  %-10s %-8s  %10.4f  %10.4f  %10.4f"%('cat', N, 'equal:4', variant, table.mean_abs,
              table.rms, table.prediction))

# Exhaustive low-order check: the worst |C| shrinks as N grows
print("-------------------------------------------------------------------------------------------")
for N in [128, 256, 512]:
    low = exhaustive_low_order_check(build_unitary('cat', N), build_partition(N, 'equal:4'), max_n=2, r_set=(1, 2))
    print("cat N=%4d  "%N + "  ".join(["max|C[%d]| = %.2e"%(r.n, r.max_abs) for r in low]))
