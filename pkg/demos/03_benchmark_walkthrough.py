# A small benchmark run
#
# Cuts the default suite down to a few runs per cell so it finishes in seconds.
# The command line tool runs the full version with `tcsf-bench bench`.

from tcsf import bench

suite = bench.load_suite(overrides={"n_runs": 10, "objectives": ["rastrigin", "quadratic"],
                                    "noises": ["type2", "type3"], "setting": "diminishing"})
reports = bench.run_experiments(bench.expand_suite(suite))
print(bench.emit_tables(reports, "text"))

# All estimators share their start points, so each row compares like with like.

cfg = reports[0].config
print("first start point:", bench.initial_points(cfg)[0].round(3))

# Runs that overflow count as excluded and do not enter the mean.

for rep in reports:
    for c in rep.cells:
        if c.n_excluded:
            print(f"{rep.config.tag} {c.estimator}: {c.n_excluded} of {c.n_runs} runs excluded")
