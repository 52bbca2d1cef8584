"""Synthetic two-class datasets: noisy sine waves versus AR(1) noise."""

from __future__ import annotations

import numpy as np

from tsmb.data.dataset import Dataset, LabeledSeries

SINE_LABEL = "sine"
NOISE_LABEL = "ar1"


def _sine(rng: np.random.Generator, length: int, period: float, noise: float) -> np.ndarray:
    phase = rng.uniform(0.0, 2.0 * np.pi)
    t = np.arange(length)
    return np.sin(2.0 * np.pi * t / period + phase) + noise * rng.standard_normal(length)


def _sawtooth(rng: np.random.Generator, length: int, period: float, noise: float) -> np.ndarray:
    shift = rng.uniform(0.0, period)
    t = np.arange(length) + shift
    wave = 2.0 * ((t / period) % 1.0) - 1.0
    return wave + noise * rng.standard_normal(length)


def _ar1(rng: np.random.Generator, length: int, phi: float, sigma: float) -> np.ndarray:
    out = np.empty(length)
    out[0] = rng.normal(0.0, sigma / np.sqrt(1.0 - phi**2))
    shocks = rng.normal(0.0, sigma, length)
    for t in range(1, length):
        out[t] = phi * out[t - 1] + shocks[t]
    return out


def _draw(rng: np.random.Generator, label: str, length: int, variant: int) -> np.ndarray:
    if label == SINE_LABEL:
        if variant == 0:
            return _sine(rng, length, period=20.0, noise=0.1)
        return _sawtooth(rng, length, period=20.0, noise=0.1)
    if variant == 0:
        return _ar1(rng, length, phi=0.5, sigma=0.5)
    return _ar1(rng, length, phi=-0.5, sigma=0.5)


def make_sine_vs_ar1(
    n_train_per_class: int = 20,
    n_test_per_class: int = 20,
    length: int = 100,
    seed: int = 0,
    multimodal: bool = False,
) -> Dataset:
    """Class ``sine`` (period 20, small noise) against class ``ar1`` (AR(1) noise).

    With ``multimodal=True`` each class alternates between two sub-shapes:
    sine or sawtooth for the periodic class, positive or negative
    autocorrelation for the noise class.
    """
    rng = np.random.default_rng(seed)

    def block(count: int) -> tuple[LabeledSeries, ...]:
        out = []
        for label in (SINE_LABEL, NOISE_LABEL):
            for i in range(count):
                variant = i % 2 if multimodal else 0
                out.append(LabeledSeries(values=_draw(rng, label, length, variant), label=label))
        return tuple(out)

    train = block(n_train_per_class)
    test = block(n_test_per_class)
    name = "SineVsAR1Multimodal" if multimodal else "SineVsAR1"
    return Dataset(name=name, train=train, test=test)
