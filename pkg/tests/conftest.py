from pathlib import Path

import numpy as np
import pytest
import torch

from cmrp.generate import GeneratorConfig, generate_batch
from cmrp.nn.model import AttentionModel, FeatureNorm, ModelConfig
from cmrp.oracle import enumerate_population

MODELS_DIR = Path(__file__).resolve().parents[1] / "models"
CONFIGS_DIR = Path(__file__).resolve().parents[1] / "configs"

TINY = ModelConfig(hidden_dim=16, heads=2, encoder_layers=1, feedforward_dim=32)


def tiny_model(seed=0, config=TINY, norm=FeatureNorm(), dtype=torch.float32):
    torch.manual_seed(seed)
    model = AttentionModel(config, norm)
    return model.to(dtype)


class Enumerated:
    """Held-out scenarios with their exact optimum and population median."""

    def __init__(self, scenarios):
        pops = [enumerate_population(s) for s in scenarios]
        self.scenarios = scenarios
        self.opt = np.array([p.optimal_time for p in pops])
        self.med = np.array([p.median_time for p in pops])
        self.opt_plans = [p.optimal_plan for p in pops]


@pytest.fixture(scope="session")
def held_out_342():
    """300 test instances of 3 agents / 4 tasks / delta 2, 100 per test seed."""
    cfg = GeneratorConfig(n_tasks=4, n_agents=3, delta=2)
    scen = [s for seed in (1, 2, 3) for s in generate_batch(cfg, 100, seed=10_000 + seed)]
    return Enumerated(scen)


@pytest.fixture(autouse=True)
def _single_thread():
    torch.set_num_threads(1)


ACCEPTANCE: list[str] = []


def record(number: int, name: str, ok: bool, detail: str) -> bool:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2} {name}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
