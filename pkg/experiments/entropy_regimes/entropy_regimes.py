import os
import joblib
import numpy as np
import matplotlib.pyplot as plt

from torusent.choi import entropy_series, classify_regimes
from torusent.harness import reference_ks_entropy
from torusent.measurement import build_partition
from torusent.torus_maps import build_unitary

colors = {'cat': 'k', 'elliptic': 'blue', 'shift': 'red', 'haar': 'green'}
markers = {16: 'o', 32: 's', 64: '^'}


def compute_series(kind, N, spec, n_max, seed=0):
    qmap = build_unitary(kind, N, seed=seed)
    P = build_partition(N, spec)
    return (kind, N, spec), entropy_series(qmap, P, n_max)


def print_results(results):

    print("-----------------------------------------------------------------------------------------------")
    print("%-9s %4s  %-16s %7s  %7s  %7s  %9s  %-20s"%("Map", "N", "Partition", "h(P)", "I[1]", "I[end]", "KS step", "Regime"))
    for (kind, N, spec), series in results.items():
        h_ks = reference_ks_entropy(kind)
        regime = classify_regimes(series, h_ks) if h_ks is not None else None
        ks_step = regime.ks_window_step if regime is not None else None
        print("%-9s %4d  %-16s %7.3f  %7.3f  %7.3f  %9s  %-20s"%(kind, N, spec, series.h_meas, series.values[1],
              series.values[-1], ks_step, regime.label if regime is not None else "-"))


def plot_results(results, selector, title, outfile):

    plt.figure(figsize=(10,5))
    maxN = 0
    for (kind, N, spec), series in results.items():
        if not selector(kind, N, spec):
            continue
        maxN = max(maxN, N)
        # Normalize by 2 ln N so that different dimensions share the saturation level
        plt.plot(series.steps, series.values / series.bound_sat, label="%s N=%d %s"%(kind, N, spec),
                 color=colors[kind], marker=markers.get(N, '.'), linestyle='-' if kind == 'cat' else ':')
    plt.axhline(1.0, color='gray', linestyle='-.')
    plt.legend()
    plt.xlabel("n")
    plt.ylabel("I[n] / 2 ln N")
    plt.title(title)
    plt.savefig(outfile, dpi=300)
    plt.close()


n_max = 14
outres = "results/entropy_regimes"
if not os.path.isdir(outres):
    os.makedirs(outres)

configs  = [('cat', N, spec) for N in [16, 32, 64] for spec in ['equal:4', 'equal:8']]
configs += [(kind, 64, spec) for kind in ['elliptic', 'shift', 'haar'] for spec in ['equal:4', 'equal:8']]
configs += [('cat', 64, 'sizes:4,4,8,48'), ('cat', 64, 'sizes:16,16,16,16')]

# Each N=64 Choi tensor takes a few hundred MB
out = joblib.Parallel(n_jobs=2, prefer="threads")(joblib.delayed(compute_series)(kind, N, spec, n_max)
                                                  for kind, N, spec in configs)
results = dict(out)

print_results(results)

plot_results(results, lambda kind, N, spec: kind == 'cat' and spec.startswith('equal'),
             "cat map, scaling with N", "%s/cat_vs_N.png"%outres)

plot_results(results, lambda kind, N, spec: N == 64 and spec == 'equal:8',
             "map comparison, N=64, K=8", "%s/maps_K8.png"%outres)

plot_results(results, lambda kind, N, spec: N == 64 and spec == 'equal:4',
             "map comparison, N=64, K=4", "%s/maps_K4.png"%outres)

plot_results(results, lambda kind, N, spec: kind == 'cat' and N == 64 and spec in ['equal:4', 'sizes:4,4,8,48'],
             "equal vs unequal blocks, N=64", "%s/unequal_blocks.png"%outres)
