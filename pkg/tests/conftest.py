"""Shared fixtures: small phantoms and a seeded on-disk cohort."""

from __future__ import annotations

import numpy as np
import pytest

from src.analyzers.decomposition import IVIMParams, ivim_signal
from src.analyzers.phantom import CohortSpec, NoiseModel, generate_cohort
from src.models.dwi_study import BValueSet, DWIStudy, TimePoint
from src.parsers.manifest_parser import save_cohort

TUMOR = IVIMParams(s0=1000.0, d=1.0e-3, d_star=50.0e-3, f=0.2)


def uniform_study(
    params: IVIMParams = TUMOR,
    shape: tuple[int, int, int] = (3, 4, 4),
    bvalues: BValueSet | None = None,
    spacing: tuple[float, float, float] = (2.0, 1.0, 1.0),
    patient_id: str = "P001",
    time_point: TimePoint = TimePoint.T0,
) -> DWIStudy:
    """Noiseless study with the same IVIM parameters in every voxel, mask = whole grid."""
    bvalues = bvalues or BValueSet.canonical()
    signal = ivim_signal(bvalues.as_array(), np.full(shape, params.s0), params.d, params.d_star, params.f)
    return DWIStudy(patient_id, time_point, bvalues, signal, np.ones(shape, dtype=bool), spacing)


@pytest.fixture
def study() -> DWIStudy:
    return uniform_study()


def small_cohort_spec(**changes) -> CohortSpec:
    base = dict(n_patients=20, prevalence=0.3, shape=(5, 10, 10), noise=NoiseModel.rician(80.0), seed=7)
    base.update(changes)
    return CohortSpec(**base)


@pytest.fixture(scope="session")
def cohort_dir(tmp_path_factory):
    """A 20-patient phantom cohort written to disk; returns the manifest path."""
    out = tmp_path_factory.mktemp("cohort")
    return save_cohort(generate_cohort(small_cohort_spec()), out)
