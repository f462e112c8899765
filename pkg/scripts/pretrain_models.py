"""Train the acceptance-suite models into artifacts/models."""
import dataclasses
import logging
from pathlib import Path

from statemerge.harness import ensure_trained, full_scale_config

logging.basicConfig(level=logging.INFO)
CACHE = Path(__file__).parent / "artifacts" / "models"
jobs = [full_scale_config(6), dataclasses.replace(full_scale_config(7), epochs=24)]
jobs += [full_scale_config(lang) for lang in (1, 2, 3, 4, 5)]
for cfg in jobs:
    ensure_trained(cfg, CACHE)
    print(f"done {cfg.language} {cfg.epochs}", flush=True)
