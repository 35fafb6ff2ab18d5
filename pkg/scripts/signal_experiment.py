"""Train on the full-length synthetic series and compare against persistence.

usage: python scripts/signal_experiment.py [key=value ...]
"""

import sys
import time

from semf.config import TrainConfig
from semf.data import synthesize_dataset
from semf.training import evaluate, persistence_baseline, prepare_splits, train

DEFAULTS = {"d_model": "32", "n_layers": "1", "exo_encoder_kind": "mlp", "max_epochs": "15", "patience": "4", "learning_rate": "1e-3"}


def main(argv: list[str]) -> None:
    overrides = dict(DEFAULTS)
    for item in argv:
        key, _, value = item.partition("=")
        overrides[key] = value
    cfg = TrainConfig.from_mapping(overrides)
    start = time.perf_counter()
    splits = prepare_splits(synthesize_dataset(cfg.seed, 3339), cfg)
    result = train(cfg, splits)
    model = evaluate(result.model, splits.test, splits.standardizer)
    base = persistence_baseline(splits.test)
    print(result.log_csv())
    print(model.to_table())
    ratio = model.averaged["rmse"] / base.averaged["rmse"]
    print(f"rmse ratio vs persistence {ratio:.4f}, best epoch {result.best_epoch}, {time.perf_counter() - start:.0f} s")


if __name__ == "__main__":
    main(sys.argv[1:])
