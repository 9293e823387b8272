import numpy as np
import pytest

from edit3d.geometry import Camera, DepthMap, Image


def random_rotation(rng) -> np.ndarray:
    """Uniform-ish random rotation via QR with positive determinant."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 2] = -q[:, 2]
    return q


def identity_camera(width=8, height=6, fx=50.0, fy=50.0) -> Camera:
    return Camera(fx=fx, fy=fy, cx=width / 2, cy=height / 2,
                  rotation=np.eye(3), translation=np.zeros(3),
                  width=width, height=height)


def random_camera(rng, width=8, height=6) -> Camera:
    R = random_rotation(rng)
    return Camera(
        fx=rng.uniform(20, 120),
        fy=rng.uniform(20, 120),
        cx=rng.uniform(0.2, 0.8) * width,
        cy=rng.uniform(0.2, 0.8) * height,
        rotation=R,
        translation=rng.uniform(-1, 1, 3),
        width=width,
        height=height,
    )


def random_depth(rng, height=6, width=8, lo=1.0, hi=5.0) -> DepthMap:
    return DepthMap.from_values(rng.uniform(lo, hi, (height, width)))


def random_image(rng, height=6, width=8) -> Image:
    return Image(rng.uniform(0, 1, (height, width, 3)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture(scope="session")
def insertion_session():
    """Box-insertion oracle session (orbit), shared read-only by many tests."""
    from edit3d import pipeline as pl
    from edit3d import synth as sy

    spec = sy.insertion_scene("orbit", frames=16)
    kwargs, truth = sy.session_inputs(spec)
    session = pl.EditSession(**kwargs)
    return spec, session, truth
