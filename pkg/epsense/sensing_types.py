from __future__ import annotations

import math
from typing import (
    Annotated,
    Dict,
    List,
    Literal,
    Optional,
    Tuple,
    Union,
)

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    TypeAdapter,
    field_validator,
    model_validator,
)

from epsense.numerics import as_cmat, as_cvec, eigenvalues, is_hermitian, spectral_norm

HERMITIAN_RTOL = 1e-12
PASSIVITY_TOL = 1e-12


def _frozen(a) -> np.ndarray:
    arr = as_cmat(a).copy()
    arr.setflags(write=False)
    return arr


def _frozen_vec(v) -> np.ndarray:
    arr = as_cvec(v).copy()
    arr.setflags(write=False)
    return arr


class ArrayModel(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


# ---------- Model zoo parameters ----------


class TwoRing(BaseModel):
    """Two coupled rings, the upper one side-coupled to the waveguide."""

    kind: Literal["two-ring"] = "two-ring"
    gamma: float = Field(1.0, gt=0)
    # None selects the EP value gamma / 4
    v: Optional[float] = None
    v_phase: float = 0.0
    kappa: float = Field(0.0, ge=0)

    @property
    def coupling(self) -> complex:
        magnitude = self.gamma / 4 if self.v is None else self.v
        return magnitude * complex(math.cos(self.v_phase), math.sin(self.v_phase))


class ThreeRing(BaseModel):
    """Chain of three rings; defaults sit at the third-order EP."""

    kind: Literal["three-ring"] = "three-ring"
    gamma: float = Field(1.0, gt=0)
    v1: Optional[float] = None
    v2: Optional[float] = None
    v1_phase: float = 0.0
    v2_phase: float = 0.0
    kappa: float = Field(0.0, ge=0)

    @property
    def coupling1(self) -> complex:
        magnitude = (
            math.sqrt(2) * self.gamma / (3 * math.sqrt(3)) if self.v1 is None else self.v1
        )
        return magnitude * complex(math.cos(self.v1_phase), math.sin(self.v1_phase))

    @property
    def coupling2(self) -> complex:
        magnitude = self.gamma / (6 * math.sqrt(3)) if self.v2 is None else self.v2
        return magnitude * complex(math.cos(self.v2_phase), math.sin(self.v2_phase))


class SingleRing(BaseModel):
    """Single ring: the isolated-mode reference.

    `gamma` is the waveguide coupling of the multi-ring system being compared
    against and only sets the reporting unit; `gamma_wg` is the actual
    waveguide coupling of this ring (default gamma / 2).
    """

    kind: Literal["single-ring"] = "single-ring"
    gamma: float = Field(1.0, gt=0)
    gamma_wg: Optional[float] = Field(None, gt=0)
    kappa: float = Field(0.0, ge=0)

    @property
    def waveguide_coupling(self) -> float:
        return self.gamma / 2 if self.gamma_wg is None else self.gamma_wg


class MirrorRing(BaseModel):
    """Ring on a semi-infinite waveguide closed by a partial mirror."""

    kind: Literal["mirror-ring"] = "mirror-ring"
    gamma: float = Field(1.0, gt=0)
    rho: float = Field(0.0, ge=0, le=1)
    phi: float = 0.0
    kappa: float = Field(0.0, ge=0)


ModelParams = Annotated[
    Union[TwoRing, ThreeRing, SingleRing, MirrorRing],
    Field(discriminator="kind"),
]

MODEL_PARAMS_ADAPTER: TypeAdapter = TypeAdapter(ModelParams)

ModelKind = Literal["two-ring", "three-ring", "single-ring", "mirror-ring"]


# ---------- Scattering system ----------


class ScatteringModel(ArrayModel):
    """Hermitian cavity Hamiltonian plus channel couplings.

    `w` is N x M: column m holds the coupling amplitudes of channel m to the
    N internal modes. Channels listed in `loss_channels` are auxiliary
    (unobservable) loss channels; `observed_channels` are the ones a
    detector can monitor.
    """

    h_sys: np.ndarray
    w: np.ndarray
    observed_channels: Tuple[int, ...] = (0,)
    loss_channels: Tuple[int, ...] = ()
    omega_ref: float = 0.0
    gamma_ref: float = Field(1.0, gt=0)
    label: str = "custom"

    @field_validator("h_sys", "w", mode="before")
    @classmethod
    def _to_array(cls, value):
        return _frozen(value)

    @model_validator(mode="after")
    def _check_invariants(self) -> "ScatteringModel":
        n = self.h_sys.shape[0]
        if self.h_sys.shape != (n, n):
            raise ValueError(f"h_sys must be square, got shape {self.h_sys.shape}")
        if self.w.shape[0] != n:
            raise ValueError(
                f"w must have {n} rows (one per internal mode), got {self.w.shape[0]}"
            )
        if self.w.shape[1] < 1:
            raise ValueError("At least one scattering channel is required")
        if not is_hermitian(self.h_sys, HERMITIAN_RTOL):
            raise ValueError("h_sys must be Hermitian")
        if not self.observed_channels:
            raise ValueError("observed_channels must not be empty")
        m = self.w.shape[1]
        for channel in (*self.observed_channels, *self.loss_channels):
            if not 0 <= channel < m:
                raise ValueError(f"Channel index {channel} outside 0..{m - 1}")

        h = self.h_sys - 1j * self.w @ np.conj(self.w).T
        scale = max(1.0, spectral_norm(h))
        worst = float(np.max(eigenvalues(h).imag))
        if worst > PASSIVITY_TOL * scale:
            raise ValueError(f"Model is not passive: eigenvalue with Im = {worst:.3e}")
        return self

    @property
    def n_modes(self) -> int:
        return self.h_sys.shape[0]

    @property
    def n_channels(self) -> int:
        return self.w.shape[1]


class Perturbation(ArrayModel):
    """Hermitian generator H1 of the sensed parameter epsilon."""

    h1: np.ndarray
    localized_site: Optional[int] = None
    label: str = ""

    @field_validator("h1", mode="before")
    @classmethod
    def _to_array(cls, value):
        return _frozen(value)

    @model_validator(mode="after")
    def _check_invariants(self) -> "Perturbation":
        n = self.h1.shape[0]
        if self.h1.shape != (n, n):
            raise ValueError(f"h1 must be square, got shape {self.h1.shape}")
        if not is_hermitian(self.h1, HERMITIAN_RTOL):
            raise ValueError("h1 must be Hermitian")
        if self.localized_site is not None:
            j = self.localized_site
            if not 0 <= j < n:
                raise ValueError(f"Localized site {j} outside 0..{n - 1}")
            projector = np.zeros((n, n), dtype=np.complex128)
            projector[j, j] = 1.0
            if not np.array_equal(self.h1, projector):
                raise ValueError(f"A perturbation localized at {j} must equal |{j}><{j}|")
        return self

    @classmethod
    def localized(cls, n_modes: int, site: int) -> "Perturbation":
        h1 = np.zeros((n_modes, n_modes), dtype=np.complex128)
        if 0 <= site < n_modes:
            h1[site, site] = 1.0
        return cls(h1=h1, localized_site=site, label=f"frequency shift of site {site}")


# ---------- Spectral results ----------


class KatoCluster(ArrayModel):
    omega: complex
    order: int = Field(ge=1)
    # Nilpotency index of the cluster: the EP order when >= 2
    ep_order: int = Field(ge=1)
    projector: np.ndarray
    nilpotent: np.ndarray
    members: Tuple[complex, ...]

    @field_validator("projector", "nilpotent", mode="before")
    @classmethod
    def _to_array(cls, value):
        return _frozen(value)

    @property
    def is_exceptional(self) -> bool:
        return self.ep_order >= 2

    @property
    def decay(self) -> float:
        return abs(self.omega.imag)


class KatoDecomposition(ArrayModel):
    hamiltonian: np.ndarray
    clusters: List[KatoCluster]

    @field_validator("hamiltonian", mode="before")
    @classmethod
    def _to_array(cls, value):
        return _frozen(value)


class LdosSample(BaseModel):
    site: int
    omega: float
    rho: float
    modal_terms: Optional[List[complex]] = None

    @property
    def modal_ldos(self) -> Optional[List[float]]:
        """Real LDOS contribution of each mode; these sum to `rho`."""
        if self.modal_terms is None:
            return None
        return [term.imag for term in self.modal_terms]


class PassiveBound(BaseModel):
    xi_max: float
    xi_max_strict: float
    ef_cap: float
    ef_cap_strict: float


# ---------- QFI results ----------


class QfiBounds(BaseModel):
    localized: float
    general: float


class QfiEvaluation(ArrayModel):
    omega: float
    i_input: float = Field(ge=0)
    i_max: float = Field(ge=0)
    i_avg: float = Field(ge=0)
    i_reduced: Optional[float] = None
    optimal_input: np.ndarray
    q_operator: np.ndarray
    bounds: QfiBounds

    @field_validator("optimal_input", mode="before")
    @classmethod
    def _to_vector(cls, value):
        return _frozen_vec(value)

    @field_validator("q_operator", mode="before")
    @classmethod
    def _to_array(cls, value):
        return _frozen(value)


class PhaseResponse(BaseModel):
    epsilon_grid: List[float]
    phase: List[float]
    dphase_deps: float

    @property
    def qfi(self) -> float:
        return 4.0 * self.dphase_deps**2


# ---------- Sweeps ----------

SweepParameter = Literal[
    "v", "v1", "v2", "kappa", "gamma", "gamma_wg", "rho", "phi", "epsilon", "omega"
]

FigureOfMerit = Literal[
    "i_max",
    "i_max_gamma2",
    "i_avg",
    "i_reduced",
    "i_reduced_gamma2",
    "i_reduced_kappa2",
    "i_mod",
    "ldos",
    "xi",
    "bound_localized",
    "bound_general",
    "decay_min",
    "phase",
]


class GridSpec(BaseModel):
    start: float
    stop: float
    points: int = Field(ge=2)
    scale: Literal["linear", "log"] = "linear"

    @model_validator(mode="after")
    def _check_range(self) -> "GridSpec":
        if not self.start < self.stop:
            raise ValueError(f"Grid start {self.start} must be below stop {self.stop}")
        if self.scale == "log" and self.start <= 0:
            raise ValueError("A log grid needs a positive start")
        return self

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.start, self.stop, self.points)
        return np.linspace(self.start, self.stop, self.points)


class SweepSpec(BaseModel):
    model: ModelParams
    parameter: SweepParameter
    grid: GridSpec
    outputs: List[FigureOfMerit] = Field(min_length=1)
    omega: float = 0.0
    v_policy: Literal["fixed", "ep", "optimal"] = "fixed"
    workers: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _check_parameter(self) -> "SweepSpec":
        if self.parameter not in ("epsilon", "omega") and self.parameter not in type(
            self.model
        ).model_fields:
            raise ValueError(
                f"Model '{self.model.kind}' has no parameter '{self.parameter}'"
            )
        if self.v_policy != "fixed" and self.model.kind != "two-ring":
            raise ValueError("v_policy other than 'fixed' needs the two-ring model")
        if self.v_policy != "fixed" and self.parameter == "v":
            raise ValueError("Cannot sweep 'v' while v_policy derives it")
        return self


class SweepResult(BaseModel):
    parameter: str
    columns: Dict[str, List[float]]
    metadata: Dict[str, str]

    @property
    def n_rows(self) -> int:
        return len(self.columns[self.parameter])
