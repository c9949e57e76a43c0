import pytest

from scenesmith.config import EngineConfig
from scenesmith.engine import Engine


@pytest.fixture
def engine_factory(tmp_path):
    """Engines with isolated storage and optional fault injection."""

    counter = {"n": 0}

    def make(
        fault_colors: dict[int, str] | None = None,
        max_edit_rounds: int = 2,
        seed: int = 7,
        **overrides,
    ) -> Engine:
        counter["n"] += 1
        config = EngineConfig(
            storage_root=tmp_path / f"store_{counter['n']}",
            seed=seed,
            max_edit_rounds=max_edit_rounds,
            mock_fault_colors=fault_colors or {},
            mock_suite_name=f"test-suite-{id(tmp_path)}-{counter['n']}",
            **overrides,
        )
        return Engine(config)

    return make
