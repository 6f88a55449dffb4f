"""Infinite dihedral group as Z/2 * Z/2: build the amalgamated quasi-action on
|T| x |Z| points and report how far reduced words move from the identity."""

import json

from soficperm.amalgam import Experiment, run_experiment
from soficperm.cli import load_config

config = load_config("builtin:infinite_dihedral")
config["vanishing"]["samples"] = 100
res = run_experiment(Experiment.from_json(config, seed=int(config["seed"])), workers=4)
for w in res.summary["words"]:
    print(f"{w['word']:<16} case {w['case']}  mean dist {w['mean_dist']:.4f}")
print(json.dumps(res.summary["oracle"], indent=1))
print("pass:", res.passed)
