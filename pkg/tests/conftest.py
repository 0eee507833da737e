import functools

import pytest
from hypothesis import HealthCheck, settings

from imt.forms import load_fixtures
from imt.jobs import FormRun, JobSpec

settings.register_profile("imt", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("imt")


@functools.lru_cache(maxsize=None)
def form_run(label: str, p: int, nmax: int = 3, prime_index: int | None = None, i: int = 0, j: int = 0) -> FormRun:
    """Shared across the session so every space is built once."""
    desc = load_fixtures()[label]
    job = JobSpec(p=p, labels=[label], prime_index=prime_index, i=i, j=j, nmax=nmax).validate([desc])
    return FormRun(desc, job)


@pytest.fixture(scope="session")
def fixtures():
    return load_fixtures()
