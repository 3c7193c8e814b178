"""Synthetic sphere-continuous test patterns for calibration and round trips.

Every pattern is periodic in longitude and constant along each pole row, so
it is genuinely continuous on the sphere; resampling quality numbers measured
on the corpus are then attributable to the resampler, not to seam artefacts
baked into the inputs.
"""

from __future__ import annotations

import numpy as np

from .geometry import _pixel_center_lonlat


def _lonlat(width, height):
    phi, theta = _pixel_center_lonlat(width, height)
    return np.broadcast_to(phi[None, :], (height, width)), np.broadcast_to(theta[:, None], (height, width))


def harmonic_pattern(width: int, height: int, k_phi: int = 3, k_theta: int = 2) -> np.ndarray:
    """Low-frequency trigonometric mix; smooth everywhere on the sphere.

    Longitude-dependent terms carry a cos(lat) factor so they vanish at the
    poles, where all longitudes are the same point.
    """
    lon, lat = _lonlat(width, height)
    cl = np.cos(lat)
    r = 0.5 + 0.5 * np.sin(k_phi * lon) * cl * np.cos(k_theta * lat)
    g = 0.5 + 0.5 * np.cos((k_phi - 1) * lon + 1.0) * cl
    b = 0.5 + 0.5 * np.sin(k_theta * lat)
    return np.stack([r, g, b], axis=-1)


def gradient_pattern(width: int, height: int) -> np.ndarray:
    """Latitude gradient with a gentle (pole-degenerate) longitude tint."""
    lon, lat = _lonlat(width, height)
    r = (lat + np.pi / 2) / np.pi
    g = 0.5 + 0.25 * np.cos(lon) * np.cos(lat)
    b = 1.0 - r
    return np.stack([r, g, b], axis=-1)


def blob_pattern(width: int, height: int, seed: int = 0, n_blobs: int = 12) -> np.ndarray:
    """Smooth Gaussian blobs at random directions on the sphere."""
    from .geometry import unit_vector

    rng = np.random.default_rng(seed)
    lon, lat = _lonlat(width, height)
    dirs = unit_vector(lon, lat)
    img = np.full((height, width, 3), 0.25)
    for _ in range(n_blobs):
        centre = unit_vector(rng.uniform(-np.pi, np.pi), rng.uniform(-np.pi / 2, np.pi / 2))
        colour = rng.uniform(0.2, 1.0, size=3)
        sharpness = rng.uniform(8.0, 40.0)
        w = np.exp(sharpness * (dirs @ centre - 1.0))
        img = img * (1 - w[..., None]) + colour[None, None, :] * w[..., None]
    return np.clip(img, 0.0, 1.0)


def pattern_corpus(width: int, height: int) -> list:
    """The default calibration corpus used by the acceptance suite."""
    return [
        harmonic_pattern(width, height),
        harmonic_pattern(width, height, k_phi=5, k_theta=3),
        gradient_pattern(width, height),
        blob_pattern(width, height, seed=1),
        blob_pattern(width, height, seed=2, n_blobs=20),
    ]
