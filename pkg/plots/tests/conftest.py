import csv

import pytest

HEADER = ["strategy", "n_lcs", "error_model", "subset", "weighting", "trials",
          "mae", "p95_abs_err", "under_pct", "over_pct", "gap2plus_pct",
          "uhm_pct", "error_sd", "mean_dist_km", "mean_dist_gap2plus_km"]

STRATEGIES = ["purpleair", "schools", "weighted:ces_score"]
MODELS = ["none", "nondiff:0.25"]
COUNTS = [0, 50, 100]
SUBSETS = ["overall", "q5_nonwhite", "q5_poverty"]
WEIGHTINGS = ["population_density", "unweighted"]


def build_sweep_rows():
    """Deterministic synthetic sweep: 2 error models x 3 strategies, with
    null uhm/error_sd cells in the zero-sensor scenarios."""
    rows = []
    for si, strategy in enumerate(STRATEGIES):
        for n in COUNTS:
            for mi, model in enumerate(MODELS):
                for bi, subset in enumerate(SUBSETS):
                    for wi, weighting in enumerate(WEIGHTINGS):
                        base = 2.0 - 0.012 * n + 0.3 * mi + 0.05 * si + 0.02 * bi
                        uhm = "" if n == 0 else f"{10.0 + 0.01 * n + mi:.6f}"
                        error_sd = "" if (n == 0 or mi == 0) else "1.25"
                        rows.append([strategy, n, model, subset, weighting, 4,
                                     f"{base:.6f}", f"{base * 3:.6f}",
                                     f"{2.0 + 0.1 * mi:.6f}", f"{3.0 - 0.1 * mi:.6f}",
                                     f"{0.4:.6f}", uhm, error_sd,
                                     f"{9.0 - 0.02 * n + 0.1 * wi:.6f}", ""])
    return rows


@pytest.fixture
def sweep_csv(tmp_path):
    path = tmp_path / "sweep.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HEADER)
        writer.writerows(build_sweep_rows())
    return path
