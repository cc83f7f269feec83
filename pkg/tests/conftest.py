import random

import pytest

from semsched.costs import BUILTIN_PROFILES, GpuProfile, estimate_remaining_time, get_profile
from semsched.requests import LengthBucket, Request, Stage, UrgencyLevel


@pytest.fixture
def a100_7b() -> GpuProfile:
    return get_profile("a100_qwen7b")


@pytest.fixture
def a5000_7b() -> GpuProfile:
    return get_profile("a5000_qwen7b")


@pytest.fixture
def synthetic() -> GpuProfile:
    return GpuProfile("syn", alpha1=0.0, alpha2=1e-4,
                      gamma1=0.01, gamma2=0.05, beta_load=0.5, beta_save=0.5)


def make_request(
    rid: int = 0,
    arrival: float = 0.0,
    urgency: int = 2,
    prompt_len: int = 100,
    output_len: int = 50,
    bucket_mid: int = 50,
    f_t: float = 1.0,
    stage: Stage = Stage.WAITING,
) -> Request:
    r = Request(
        id=rid,
        arrival_time=arrival,
        prompt_len=prompt_len,
        true_output_len=output_len,
        true_urgency=UrgencyLevel(urgency),
        f_e=UrgencyLevel(urgency),
        predicted_bucket=LengthBucket(0, bucket_mid),
        f_t=f_t,
    )
    r.stage = stage
    return r


def random_requests(n: int, seed: int = 0, levels: int = 5):
    rng = random.Random(seed)
    out = []
    for i in range(n):
        out.append(
            make_request(
                rid=i,
                arrival=rng.random() * 10,
                urgency=rng.randrange(levels),
                prompt_len=rng.randint(1, 256),
                output_len=rng.randint(1, 256),
                f_t=rng.random() * 20,
            )
        )
    return out
