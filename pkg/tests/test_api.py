"""
API endpoint tests
"""

import shutil
from pathlib import Path

import pytest
from fastapi import HTTPException

from app.core.config import settings
from app.routes.datasets import resolve_under
from app.schemas import ExperimentReport, MetricRecordSchema
from app.services import ExperimentService, NetworkService

from tests.conftest import make_tiny_config


@pytest.fixture
def served_dataset(client, tiny_dataset):
    """Copy the tiny dataset under the served data directory"""
    directory, _ = tiny_dataset
    shutil.copytree(directory, Path(settings.data_dir) / "tiny")
    return "tiny"


@pytest.fixture
def served_checkpoint(client):
    """Save an untrained generator under the served runs directory"""
    generator, critic = NetworkService.from_config(make_tiny_config().network, seed=0)
    NetworkService.save_checkpoint(Path(settings.runs_dir) / "untrained" / "epoch_000.pt",
                                   {"generator": generator, "critic": critic}, meta={"vs_choices": [2, 3, 5]})
    return "untrained/epoch_000.pt"


def test_health(client):
    """Test health check"""
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json()["status"] == "healthy"


def test_dataset_not_found(client):
    """Test unknown dataset"""
    response = client.get("/api/datasets/missing")
    assert response.status_code == 404


def test_get_dataset(client, served_dataset):
    """Test manifest of a served dataset"""
    response = client.get(f"/api/datasets/{served_dataset}")
    assert response.status_code == 200
    data = response.json()
    assert data["schedule"]["b_interleaves"] == 5
    assert len(data["sequences"]) == 2


def test_resolve_under_rejects_escape(tmp_path):
    """Test names escaping the configured directory"""
    assert resolve_under(str(tmp_path), "a/b") == (tmp_path / "a" / "b").resolve()
    with pytest.raises(HTTPException) as exc_info:
        resolve_under(str(tmp_path), "../outside")
    assert exc_info.value.status_code == 400


def test_metrics_run_not_found(client):
    """Test unknown run"""
    response = client.get("/api/metrics/nope")
    assert response.status_code == 404


def test_metrics_filters(client, db):
    """Test stored records with method and VS filters"""
    records = [
        MetricRecordSchema(sequence=1, frame=t, vs=vs, method=method, psnr_db=30.0 + t, ssim=0.9)
        for method, vs in [("aliased", 2), ("aliased", 5), ("proposed", 2)]
        for t in range(3)
    ]
    records.append(MetricRecordSchema(sequence=1, frame=0, vs=0, method="ground_truth",
                                      psnr_db=float("inf"), ssim=1.0))
    ExperimentService.persist_report(db, ExperimentReport(name="run1", records=records), seed=4)

    response = client.get("/api/metrics/run1")
    assert response.status_code == 200
    data = response.json()
    assert data["seed"] == 4
    assert len(data["records"]) == 10

    response = client.get("/api/metrics/run1", params={"method": "aliased", "vs": 5})
    rows = response.json()["records"]
    assert len(rows) == 3
    assert all(r["method"] == "aliased" and r["vs"] == 5 for r in rows)

    rows = client.get("/api/metrics/run1", params={"method": "ground_truth"}).json()["records"]
    assert rows[0]["psnr_db"] is None


def test_reconstruct_missing_inputs(client, served_dataset, served_checkpoint):
    """Test unknown dataset or checkpoint"""
    response = client.post("/api/reconstruct", json={"dataset": "nope", "checkpoint": served_checkpoint})
    assert response.status_code == 404
    response = client.post("/api/reconstruct", json={"dataset": served_dataset, "checkpoint": "nope.pt"})
    assert response.status_code == 404


def test_reconstruct_frame(client, served_dataset, served_checkpoint):
    """Test one-frame reconstruction with an untrained generator"""
    response = client.post("/api/reconstruct", json={
        "dataset": served_dataset, "checkpoint": served_checkpoint, "sequence": 1, "frame": 2, "vs": 3,
    })
    assert response.status_code == 200
    data = response.json()
    assert data["shape"] == [2, 32, 32]
    assert data["acceleration"] > 1.0
    assert data["vs_seen_in_training"] is True
    assert data["latency_ms"] >= 0.0
    assert data["ssim"] is not None


def test_reconstruct_frame_out_of_range(client, served_dataset, served_checkpoint):
    """Test service parameter errors map to 400"""
    response = client.post("/api/reconstruct", json={
        "dataset": served_dataset, "checkpoint": served_checkpoint, "sequence": 1, "frame": 6, "vs": 2,
    })
    assert response.status_code == 400
    assert response.json()["error"] == "ParameterError"


def test_reconstruct_path_traversal(client, served_checkpoint):
    """Test dataset names may not leave the data directory"""
    response = client.post("/api/reconstruct", json={"dataset": "../../etc", "checkpoint": served_checkpoint})
    assert response.status_code == 400
