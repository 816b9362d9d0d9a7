"""A reduced version of the Gaussian and mixture simulation designs.

Run with ``python demos/simulation_study.py``; the full designs use
``trials=100`` and take a few seconds per configuration.
"""

from mmgimpute.simulation import SimConfig, run_experiment

designs = {
    "gaussian / MCAR": SimConfig(mechanism="mcar", trials=20, seed=1),
    "gaussian / MAR": SimConfig(mechanism="mar", trials=20, seed=1),
    "mixture / MCAR": SimConfig(scenario="mixture2", family="mp", graph="chain", trials=10, seed=1),
    "mixture / MAR": SimConfig(scenario="mixture2", family="mp", graph="chain", mechanism="mar", trials=10, seed=1),
}

for name, cfg in designs.items():
    res = run_experiment(cfg)
    print(name)
    for method, mean, sd, bias in res.aggregate:
        print(f"  {method:5s} mean {mean:.4f}  sd {sd:.4f}  bias vs full data {bias:+.4f}")
