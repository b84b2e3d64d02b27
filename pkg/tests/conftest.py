"""
Pytest configuration and fixtures
"""

import numpy as np
import pytest
from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker
from sqlalchemy.pool import StaticPool
from fastapi.testclient import TestClient

from app.core.config import settings
from app.core.database import Base, get_db
from app.schemas import (
    EvaluationConfig,
    ExperimentConfig,
    GrappaConfig,
    NetworkConfig,
    PhantomSpec,
    PhantomSuiteConfig,
    SamplingConfig,
    TrainConfig,
    default_phantom_spec,
)
from app.services import ExperimentService, SamplingService
from main import app


# In-memory SQLite shared across the test client's threads
SQLALCHEMY_TEST_DATABASE_URL = "sqlite://"

engine = create_engine(
    SQLALCHEMY_TEST_DATABASE_URL,
    connect_args={"check_same_thread": False},
    poolclass=StaticPool,
)
TestingSessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)


def override_get_db():
    """Override database dependency for testing"""
    try:
        db = TestingSessionLocal()
        yield db
    finally:
        db.close()


# Override the get_db dependency
app.dependency_overrides[get_db] = override_get_db


def make_tiny_config(seed: int = 0) -> ExperimentConfig:
    """32x32, 6 frames, 2 coils: small enough for end-to-end runs on a laptop"""
    template = default_phantom_spec().model_copy(update={
        "grid_height": 32, "grid_width": 32, "num_frames": 6, "num_coils": 2,
    })
    return ExperimentConfig(
        name="tiny",
        seed=seed,
        phantom=PhantomSuiteConfig(template=template, num_instances=2, held_out=[1]),
        sampling=SamplingConfig(a_radius=10, lattice=(3, 2), b_interleaves=5),
        grappa=GrappaConfig(),
        network=NetworkConfig(num_coils=2, depth=2, base_filters=4, disc_widths=(8, 1)),
        train=TrainConfig(epochs=2, phase1_epochs=1, steps_per_epoch=3, vs_choices=[2, 3, 5], seed=seed),
        evaluation=EvaluationConfig(),
    )


@pytest.fixture(scope="function")
def db():
    """Create test database"""
    Base.metadata.create_all(bind=engine)
    session = TestingSessionLocal()
    yield session
    session.close()
    Base.metadata.drop_all(bind=engine)


@pytest.fixture(scope="function")
def client(db, tmp_path, monkeypatch):
    """Create test client with data and run directories under tmp_path"""
    monkeypatch.setattr(settings, "data_dir", str(tmp_path / "data"))
    monkeypatch.setattr(settings, "runs_dir", str(tmp_path / "runs"))
    return TestClient(app)


@pytest.fixture
def tiny_config():
    """Create a tiny experiment config"""
    return make_tiny_config()


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """Generate the tiny dataset once per session"""
    directory = tmp_path_factory.mktemp("datasets") / "tiny"
    manifest = ExperimentService.generate_data(make_tiny_config(), directory)
    return directory, manifest


@pytest.fixture
def schedule():
    """Create a 32x32 schedule with five interleaves"""
    return SamplingService.build_schedule(32, 32, 10, (3, 2), 6, 5)


@pytest.fixture
def rng():
    """Seeded numpy generator"""
    return np.random.default_rng(1234)


@pytest.fixture
def static_spec():
    """Create a phantom without contrast dynamics"""
    spec = default_phantom_spec()
    structures = [s.model_copy(update={"bolus": None}) for s in spec.structures]
    return PhantomSpec(grid_height=32, grid_width=32, num_frames=5, num_coils=4,
                       structures=structures, edge_sigma=1.0)
