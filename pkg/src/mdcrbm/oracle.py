"""Built-in synthetic travel-survey generators with known ground truth.

The ``mdc`` recipe draws, per trip:

* ``mode`` from a fixed marginal,
* ``purpose`` given mode,
* ``distance`` (km) lognormal given mode, walk being short and car long,
* ``time`` (hour of day) from a von Mises mixture with morning, midday and
  evening peaks whose weights depend on purpose.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UnknownRecipe
from .schema import Schema, VariableSpec

MODES = ("walk", "bike", "transit", "car")
PURPOSES = ("work", "school", "shopping", "leisure", "other")
PEAK_HOURS = (8.0, 13.0, 17.0)


@dataclass(frozen=True)
class Recipe:
    name: str
    mode_marginal: tuple
    purpose_given_mode: tuple
    distance_median: tuple
    distance_sigma: tuple
    peak_weights: tuple
    peak_kappa: float
    time_scale: float = 1.0
    distance_scale: float = 1.0

    @property
    def schema(self) -> Schema:
        return Schema((
            VariableSpec.categorical("mode", MODES),
            VariableSpec.categorical("purpose", PURPOSES),
            VariableSpec.positive("distance", scale=self.distance_scale),
            VariableSpec.cyclic("time", 24.0, scale=self.time_scale),
        ))

    def purpose_marginal(self) -> np.ndarray:
        return np.asarray(self.mode_marginal) @ np.asarray(self.purpose_given_mode)

    def truth(self) -> dict:
        """Ground-truth tables, JSON-serializable."""
        return {
            "recipe": self.name,
            "mode_levels": list(MODES),
            "purpose_levels": list(PURPOSES),
            "mode_marginal": list(self.mode_marginal),
            "purpose_given_mode": [list(r) for r in self.purpose_given_mode],
            "purpose_marginal": self.purpose_marginal().tolist(),
            "distance_median_km": list(self.distance_median),
            "distance_sigma_log": list(self.distance_sigma),
            "peak_hours": list(PEAK_HOURS),
            "peak_weights_given_purpose": [list(r) for r in self.peak_weights],
            "peak_kappa": self.peak_kappa,
        }

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Raw table ``(n, 4)`` in schema order."""
        mode = rng.choice(len(MODES), size=n, p=self.mode_marginal)
        cum = np.cumsum(np.asarray(self.purpose_given_mode), axis=1)
        purpose = np.minimum((cum[mode] <= rng.random(n)[:, None]).sum(axis=1), len(PURPOSES) - 1)
        mu = np.log(np.asarray(self.distance_median))[mode]
        distance = np.exp(mu + np.asarray(self.distance_sigma)[mode] * rng.standard_normal(n))
        wcum = np.cumsum(np.asarray(self.peak_weights), axis=1)
        peak = np.minimum((wcum[purpose] <= rng.random(n)[:, None]).sum(axis=1), len(PEAK_HOURS) - 1)
        angle = rng.vonmises(0.0, self.peak_kappa, size=n)
        time = np.mod(np.asarray(PEAK_HOURS)[peak] + angle * 24.0 / (2 * np.pi), 24.0)
        return np.column_stack([mode, purpose, distance, time]).astype(float)


RECIPES = {
    "mdc": Recipe(
        name="mdc",
        mode_marginal=(0.15, 0.10, 0.30, 0.45),
        purpose_given_mode=(
            (0.20, 0.30, 0.25, 0.15, 0.10),
            (0.35, 0.20, 0.10, 0.25, 0.10),
            (0.50, 0.25, 0.10, 0.05, 0.10),
            (0.40, 0.05, 0.25, 0.20, 0.10),
        ),
        distance_median=(1.0, 3.0, 7.0, 12.0),
        distance_sigma=(0.5, 0.5, 0.5, 0.6),
        peak_weights=(
            (0.55, 0.05, 0.40),
            (0.60, 0.15, 0.25),
            (0.15, 0.45, 0.40),
            (0.10, 0.40, 0.50),
            (0.30, 0.40, 0.30),
        ),
        peak_kappa=6.5,
        time_scale=3.0,
    ),
}


def get_recipe(name: str) -> Recipe:
    try:
        return RECIPES[name]
    except KeyError:
        raise UnknownRecipe(f"{name!r}; available: {', '.join(sorted(RECIPES))}") from None
