"""Synthetic cohorts with known ground truth: equicorrelated feature
blocks whose strength can differ between case and control, label-informative
features with chosen log-odds effects, pure-noise features, and MCAR
missingness.

Labels are drawn from a logistic model over the informative features;
block features are then drawn conditional on the realized label, so each
group carries its own planted within-block correlation.
"""

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .preprocess import ColumnSchema, RawTable


@dataclass(frozen=True)
class BlockSpec:
    member_count: int
    rho_case: float
    rho_control: float

    def __post_init__(self):
        for rho in (self.rho_case, self.rho_control):
            if not -1.0 < rho < 1.0:
                raise DataError("block correlation must lie in (-1, 1)")
        if self.member_count < 1:
            raise DataError("block needs at least one member")


@dataclass(frozen=True)
class SynthSpec:
    n_per_group: int
    blocks: tuple[BlockSpec, ...] = ()
    informative: tuple[tuple[int, float], ...] = ()  # (feature index, log-odds effect)
    noise_features: int = 0
    missing_rate: float = 0.0
    intercept: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_per_group < 1:
            raise DataError("n_per_group must be >= 1")
        if not 0.0 <= self.missing_rate < 1.0:
            raise DataError("missing_rate must be in [0, 1)")
        p = self.n_features
        for idx, effect in self.informative:
            if not 0 <= idx < p:
                raise DataError(f"informative feature index {idx} out of range")
            if not np.isfinite(effect):
                raise DataError("effect sizes must be finite")

    @property
    def n_features(self) -> int:
        return sum(b.member_count for b in self.blocks) + self.noise_features

    @property
    def block_members(self) -> list[tuple[int, ...]]:
        members = []
        start = 0
        for b in self.blocks:
            members.append(tuple(range(start, start + b.member_count)))
            start += b.member_count
        return members


@dataclass(frozen=True)
class GroundTruth:
    block_members: tuple[tuple[int, ...], ...]
    block_rho: tuple[tuple[float, float], ...]  # (case, control) per block
    informative: tuple[tuple[int, float], ...]
    feature_names: tuple[str, ...]


def _equicorrelation_cholesky(m: int, rho: float) -> np.ndarray:
    if m == 1:
        return np.ones((1, 1))
    if rho <= -1.0 / (m - 1):
        raise DataError(f"equicorrelation rho={rho} is not positive definite for block size {m}")
    cov = np.full((m, m), rho)
    np.fill_diagonal(cov, 1.0)
    return np.linalg.cholesky(cov)


def generate_cohort(spec: SynthSpec):
    """Draw one cohort; returns (RawTable, GroundTruth)."""
    p = spec.n_features
    if p < 1:
        raise DataError("cohort needs at least one feature")
    n = 2 * spec.n_per_group
    rng = np.random.default_rng(spec.seed)
    values = np.zeros((n, p))

    members = spec.block_members
    block_cols = {idx for cols in members for idx in cols}
    free_cols = [j for j in range(p) if j not in block_cols]
    values[:, free_cols] = rng.standard_normal((n, len(free_cols)))

    logits = np.full(n, spec.intercept, dtype=float)
    for idx, effect in spec.informative:
        if idx in block_cols:
            raise DataError("informative features must not be block members")
        logits += effect * values[:, idx]
    labels = (rng.random(n) < 1.0 / (1.0 + np.exp(-logits))).astype(int)

    # cholesky factors validated up front so bad rho fails before sampling
    chol = [
        (_equicorrelation_cholesky(b.member_count, b.rho_case),
         _equicorrelation_cholesky(b.member_count, b.rho_control))
        for b in spec.blocks
    ]
    for cols, (l_case, l_control) in zip(members, chol):
        raw = rng.standard_normal((n, len(cols)))
        case_rows = labels == 1
        values[np.ix_(case_rows, cols)] = raw[case_rows] @ l_case.T
        values[np.ix_(~case_rows, cols)] = raw[~case_rows] @ l_control.T

    missing_mask = rng.random((n, p)) < spec.missing_rate if spec.missing_rate > 0 else None

    names = tuple(f"bio_{j:03d}" for j in range(p))
    columns = tuple(ColumnSchema(name=name, kind="continuous") for name in names) + (
        ColumnSchema(name="label", kind="label"),
    )
    rows = []
    for r in range(n):
        row = [
            None if missing_mask is not None and missing_mask[r, j] else float(values[r, j])
            for j in range(p)
        ]
        row.append(int(labels[r]))
        rows.append(tuple(row))
    table = RawTable(columns=columns, cells=tuple(rows), row_ids=tuple(str(r + 1) for r in range(n)))
    truth = GroundTruth(
        block_members=tuple(members),
        block_rho=tuple((b.rho_case, b.rho_control) for b in spec.blocks),
        informative=tuple(spec.informative),
        feature_names=names,
    )
    return table, truth


DEMO_SPEC = SynthSpec(
    n_per_group=60,
    blocks=(
        BlockSpec(member_count=3, rho_case=0.85, rho_control=0.85),
        BlockSpec(member_count=3, rho_case=0.8, rho_control=0.1),
        BlockSpec(member_count=5, rho_case=0.75, rho_control=0.75),
    ),
    informative=((11, 3.0), (12, 2.5)),
    noise_features=4,
    missing_rate=0.03,
    seed=20240501,
)

PRESETS = {"demo": DEMO_SPEC}

# pipeline settings paired with DEMO_SPEC: the label-informative features act
# as confound proxies and are excluded from the graphs, mirroring the
# genotype-removal protocol
def demo_pipeline_config(cohort_csv: str, schema_json: str) -> dict:
    return {
        "paths": {"input_csv": cohort_csv, "schema": schema_json, "output_dir": None},
        "select": {"mrmr_m": 8, "bins": 10},
        "models": {
            "grids": {
                "elastic_net_logistic": {"lambda": [0.01, 0.1], "l1_ratio": [0.5]},
                "gradient_boosted_trees": {"rounds": [30], "max_depth": [2], "learning_rate": [0.3]},
                "shallow_mlp": {"hidden_units": [16], "epochs": [300], "step": [0.1]},
            }
        },
        "attribution": {
            "top_n": 15,
            "exclusion_patterns": ["bio_011", "bio_012"],
            "background_size": 20,
            "estimator": "sampled",
            "n_coalitions": 40,
        },
        "graph": {"alpha": 0.45, "mode": "signed"},
        "evaluation": {"B": 5, "folds": 3, "test_fraction": 0.2, "hoist_grid_search": False},
        "base_seed": 20240501,
    }


def save_cohort(table: RawTable, truth: GroundTruth, out_dir) -> dict:
    """Write cohort.csv, schema.json, and truth.json into a directory."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "cohort.csv")
    schema_path = os.path.join(out_dir, "schema.json")
    truth_path = os.path.join(out_dir, "truth.json")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([c.name for c in table.columns])
        for row in table.cells:
            writer.writerow(["" if cell is None else repr(cell) if isinstance(cell, float) else cell for cell in row])
    schema = [
        {"name": c.name, "kind": c.kind}
        | ({"unit": c.unit, "unit_scale_to_mg": c.unit_scale_to_mg} if c.unit else {})
        for c in table.columns
    ]
    with open(schema_path, "w", encoding="utf-8") as fh:
        json.dump(schema, fh, indent=2)
        fh.write("\n")
    with open(truth_path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "block_members": [list(m) for m in truth.block_members],
                "block_rho": [list(r) for r in truth.block_rho],
                "informative": [list(i) for i in truth.informative],
                "feature_names": list(truth.feature_names),
            },
            fh,
            indent=2,
        )
        fh.write("\n")
    return {"cohort": csv_path, "schema": schema_path, "truth": truth_path}
