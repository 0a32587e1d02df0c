"""Finite-dimensional operation measures.

An operation measure assigns to each outcome a positive map on density
operators; it packages the outcome probabilities and the state
reduction of a first-kind measurement in one object.  Here outcome
spaces are finite and every measure is given in Kraus form

    I({a}) rho = sum_k M_{a,k} rho M_{a,k}^dag,
    sum_{a,k} M^dag M = 1,

which makes the measure completely positive by construction.  Raw
linear maps (not necessarily CP) enter only through the Choi test,
which certifies complete positivity by the spectrum of
sum_{ij} |i><j| (x) L(|i><j|).

Every Kraus-form measure is realizable by a probe system: a unitary
coupling acting as U(psi (x) phi0) = sum_{a,k} (M_{a,k} psi) (x) |a,k>
followed by a projective probe readout reproduces the measure's
probabilities and posteriors exactly.  :func:`dilate` constructs that
realization with a deterministic orthonormal completion, and
:func:`realization_statistics` recovers the statistics from it without
reference to the Kraus operators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    CompletenessViolation,
    DegenerateKraus,
    DomainError,
    InputError,
    UnknownOutcome,
    ZeroProbabilityOutcome,
    ZeroProbabilitySet,
)

#: Eigenvalues above this (negative) floor count as nonnegative.
PSD_TOL = -1e-10

_COMPLETENESS_TOL = 1e-10


def _as_matrix(m, dim: int | None = None) -> np.ndarray:
    out = np.asarray(m, dtype=complex)
    if out.ndim != 2 or out.shape[0] != out.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {out.shape}")
    if dim is not None and out.shape[0] != dim:
        raise DomainError(f"expected a {dim}x{dim} matrix, got {out.shape}")
    return out


class DensityOperator:
    """Validated density operator: Hermitian, PSD, unit trace."""

    def __init__(self, matrix):
        m = _as_matrix(matrix)
        if np.max(np.abs(m - m.conj().T)) > 1e-12:
            raise DomainError("density operator must be Hermitian within 1e-12")
        eigs = np.linalg.eigvalsh(m)
        if eigs.min() < PSD_TOL:
            raise DomainError(
                f"density operator has negative eigenvalue {eigs.min():.3e}")
        if abs(np.trace(m).real - 1.0) > 1e-10:
            raise DomainError(f"density operator trace {np.trace(m).real!r} != 1")
        self.matrix = m
        self.matrix.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def pure(cls, vector) -> "DensityOperator":
        v = np.asarray(vector, dtype=complex)
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityOperator":
        return cls(np.eye(dim) / dim)

    @classmethod
    def random(cls, dim: int, rng: np.random.Generator) -> "DensityOperator":
        g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        m = g @ g.conj().T
        return cls(m / np.trace(m).real)


@dataclass(frozen=True)
class FiniteOperationMeasure:
    """Kraus-form operation measure on a d-dimensional system.

    ``kraus`` maps each outcome label to its Kraus family; the families
    jointly satisfy sum M^dag M = 1 within 1e-10.
    """

    dim: int
    kraus: Mapping[Hashable, tuple[np.ndarray, ...]]

    def __post_init__(self) -> None:
        frozen: dict[Hashable, tuple[np.ndarray, ...]] = {}
        total = np.zeros((self.dim, self.dim), dtype=complex)
        for outcome, family in self.kraus.items():
            ops = tuple(_as_matrix(m, self.dim) for m in family)
            if not ops:
                raise DomainError(f"outcome {outcome!r} has an empty Kraus family")
            for op in ops:
                op.setflags(write=False)
                total += op.conj().T @ op
            frozen[outcome] = ops
        if not frozen:
            raise DomainError("operation measure needs at least one outcome")
        if np.max(np.abs(total - np.eye(self.dim))) > _COMPLETENESS_TOL:
            raise CompletenessViolation(
                "Kraus families do not resolve the identity: "
                f"max deviation {np.max(np.abs(total - np.eye(self.dim))):.3e}")
        object.__setattr__(self, "kraus", frozen)

    @property
    def outcomes(self) -> tuple[Hashable, ...]:
        return tuple(self.kraus.keys())

    def _family(self, outcome: Hashable) -> tuple[np.ndarray, ...]:
        try:
            return self.kraus[outcome]
        except KeyError:
            raise UnknownOutcome(f"unknown outcome {outcome!r}") from None


@dataclass(frozen=True)
class EffectMeasure:
    """Positive-operator-valued measure recovered from an operation measure."""

    effects: Mapping[Hashable, np.ndarray]

    def __post_init__(self) -> None:
        total = None
        for outcome, f in self.effects.items():
            f = _as_matrix(f)
            if np.linalg.eigvalsh(f).min() < PSD_TOL:
                raise DomainError(f"effect for outcome {outcome!r} is not PSD")
            total = f if total is None else total + f
        if np.max(np.abs(total - np.eye(total.shape[0]))) > 1e-9:
            raise CompletenessViolation("effects do not sum to the identity")

    def __getitem__(self, outcome: Hashable) -> np.ndarray:
        return self.effects[outcome]


def _resolve_set(om: FiniteOperationMeasure, outcome_set) -> tuple:
    outcomes = tuple(outcome_set)
    for a in outcomes:
        om._family(a)
    return outcomes


def _apply_raw(om: FiniteOperationMeasure, outcomes: Iterable[Hashable],
               matrix: np.ndarray) -> np.ndarray:
    out = np.zeros((om.dim, om.dim), dtype=complex)
    for a in outcomes:
        for m in om._family(a):
            out += m @ matrix @ m.conj().T
    return out


def apply(om: FiniteOperationMeasure, outcome_set,
          rho: DensityOperator | np.ndarray) -> np.ndarray:
    """Unnormalized post-measurement operator for an outcome set.

    Returns sum over the set of the Kraus sandwiches; its trace is the
    probability of the set (1 for the full set, 0 for the empty set).
    """
    matrix = rho.matrix if isinstance(rho, DensityOperator) else _as_matrix(rho, om.dim)
    return _apply_raw(om, _resolve_set(om, outcome_set), matrix)


def probability(om: FiniteOperationMeasure, outcome: Hashable,
                rho: DensityOperator) -> float:
    """Tr of the outcome's Kraus sandwich."""
    return float(np.trace(apply(om, [outcome], rho)).real)


def posterior(om: FiniteOperationMeasure, outcome: Hashable,
              rho: DensityOperator) -> DensityOperator:
    """Normalized state after observing the outcome."""
    raw = apply(om, [outcome], rho)
    p = float(np.trace(raw).real)
    if p < 1e-14:
        raise ZeroProbabilityOutcome(
            f"outcome {outcome!r} has probability {p!r}; posterior undefined")
    return DensityOperator(_hermitize(raw / p))


def subensemble_state(om: FiniteOperationMeasure, outcome_set,
                      rho: DensityOperator) -> DensityOperator:
    """State of the subensemble whose readouts fell in the given set.

    Equals the probability-weighted mixture of the per-outcome
    posteriors.
    """
    raw = apply(om, outcome_set, rho)
    p = float(np.trace(raw).real)
    if p < 1e-14:
        raise ZeroProbabilitySet(
            f"outcome set has probability {p!r}; subensemble undefined")
    return DensityOperator(_hermitize(raw / p))


def _hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def effect_measure(om: FiniteOperationMeasure) -> EffectMeasure:
    """F(a) = sum_k M^dag M; satisfies Tr[F(a) rho] = probability(a|rho)."""
    effects = {a: _hermitize(sum(m.conj().T @ m for m in family))
               for a, family in om.kraus.items()}
    return EffectMeasure(effects=effects)


# ---------------------------------------------------------------------------
# complete positivity (Choi test)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CPCheckResult:
    """Outcome of the Choi positivity test.

    ``witness`` is the eigenvector of the most negative Choi eigenvalue
    when the test fails (None when it passes); ``outcome`` identifies
    the failing outcome for per-outcome tests.
    """

    passed: bool
    min_eigenvalue: float
    witness: np.ndarray | None = None
    outcome: Hashable | None = None


def choi_matrix(op_map: Callable[[np.ndarray], np.ndarray], dim: int) -> np.ndarray:
    """Choi matrix sum_{ij} |i><j| (x) L(|i><j|) of a linear map."""
    out = np.zeros((dim * dim, dim * dim), dtype=complex)
    for i in range(dim):
        for j in range(dim):
            unit = np.zeros((dim, dim), dtype=complex)
            unit[i, j] = 1.0
            out += np.kron(unit, _as_matrix(op_map(unit), dim))
    return out


def is_completely_positive(operation, dim: int | None = None) -> CPCheckResult:
    """Choi test for complete positivity.

    Accepts a :class:`FiniteOperationMeasure` (tested per outcome; Kraus
    form always passes) or a raw linear map given as a callable on d x d
    matrices together with ``dim`` -- the entry point for maps that are
    positive but not CP, such as the transpose.
    """
    if isinstance(operation, FiniteOperationMeasure):
        worst = CPCheckResult(passed=True, min_eigenvalue=np.inf)
        for a, family in operation.kraus.items():
            def om_map(m, family=family):
                return sum(k @ m @ k.conj().T for k in family)
            result = _choi_check(om_map, operation.dim, outcome=a)
            if result.min_eigenvalue < worst.min_eigenvalue:
                worst = result
        return worst
    if dim is None:
        raise DomainError("raw-map input requires the dimension")
    return _choi_check(operation, dim, outcome=None)


def _choi_check(op_map, dim: int, outcome) -> CPCheckResult:
    choi = _hermitize(choi_matrix(op_map, dim))
    eigenvalues, vectors = np.linalg.eigh(choi)
    min_eig = float(eigenvalues[0])
    if min_eig >= PSD_TOL:
        return CPCheckResult(passed=True, min_eigenvalue=min_eig, outcome=outcome)
    return CPCheckResult(passed=False, min_eigenvalue=min_eig,
                         witness=vectors[:, 0], outcome=outcome)


# ---------------------------------------------------------------------------
# weak repeatability
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeakRepeatabilityReport:
    """Largest violation of Tr[I(B n C) rho] = Tr[I(B) I(C) rho]."""

    max_violation: float
    worst_pair: tuple | None
    passed: bool


def _outcome_subsets(outcomes: Sequence[Hashable]) -> list[tuple]:
    if len(outcomes) <= 6:
        subsets = []
        for mask in range(2 ** len(outcomes)):
            subsets.append(tuple(a for i, a in enumerate(outcomes)
                                 if mask & (1 << i)))
        return subsets
    singletons = [(a,) for a in outcomes]
    return [()] + singletons + [tuple(outcomes)]


def check_weak_repeatability(om: FiniteOperationMeasure, test_densities,
                             tol: float = 1e-9) -> WeakRepeatabilityReport:
    """Test repeatability over all pairs of subsets of a generator family.

    Projective (discrete von Neumann) measures pass; smeared measures
    with overlapping kernels fail.
    """
    subsets = _outcome_subsets(om.outcomes)
    worst = 0.0
    worst_pair = None
    for rho_idx, rho in enumerate(test_densities):
        matrix = rho.matrix if isinstance(rho, DensityOperator) else rho
        applied = {s: _apply_raw(om, s, matrix) for s in subsets}
        for b in subsets:
            for c in subsets:
                cset = set(c)
                joint = tuple(a for a in b if a in cset)
                lhs = float(np.trace(_apply_raw(om, joint, matrix)).real)
                rhs = float(np.trace(_apply_raw(om, b, applied[c])).real)
                violation = abs(lhs - rhs)
                if violation > worst:
                    worst = violation
                    worst_pair = (b, c, rho_idx)
    return WeakRepeatabilityReport(max_violation=worst, worst_pair=worst_pair,
                                   passed=worst <= tol)


# ---------------------------------------------------------------------------
# canonical measures
# ---------------------------------------------------------------------------

def von_neumann_discrete(dim: int) -> FiniteOperationMeasure:
    """Projective measurement of the computational basis.

    Outcome i has the single Kraus operator |i><i|; probabilities are
    |<i|psi>|^2 and posteriors the basis states.
    """
    if dim < 2:
        raise DomainError(f"need dim >= 2, got {dim}")
    kraus = {}
    for i in range(dim):
        proj = np.zeros((dim, dim), dtype=complex)
        proj[i, i] = 1.0
        kraus[i] = (proj,)
    return FiniteOperationMeasure(dim=dim, kraus=kraus)


def smeared_position_measure(kernel_rows: np.ndarray) -> FiniteOperationMeasure:
    """Diagonal smearing measure M_a = sum_x sqrt(G(a, x)) |x><x|.

    ``kernel_rows[a, x]`` must be column-stochastic:
    sum_a G(a, x) = 1 for every x.  Overlapping rows make the measure
    non-repeatable.
    """
    g = np.asarray(kernel_rows, dtype=float)
    if g.ndim != 2 or np.any(g < 0):
        raise DomainError("kernel must be a nonnegative 2-d array")
    if np.max(np.abs(g.sum(axis=0) - 1.0)) > 1e-12:
        raise CompletenessViolation("kernel columns must each sum to 1")
    dim = g.shape[1]
    kraus = {a: (np.diag(np.sqrt(g[a])).astype(complex),)
             for a in range(g.shape[0])}
    return FiniteOperationMeasure(dim=dim, kraus=kraus)


def random_operation_measure(dim: int, n_outcomes: int, max_kraus: int,
                             rng: np.random.Generator) -> FiniteOperationMeasure:
    """Haar-flavored random Kraus-form measure (exactly normalized)."""
    raw: dict[Hashable, list[np.ndarray]] = {}
    total = np.zeros((dim, dim), dtype=complex)
    for a in range(n_outcomes):
        count = int(rng.integers(1, max_kraus + 1))
        raw[a] = [rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
                  for _ in range(count)]
        for m in raw[a]:
            total += m.conj().T @ m
    eigenvalues, vectors = np.linalg.eigh(_hermitize(total))
    inv_sqrt = vectors @ np.diag(eigenvalues ** -0.5) @ vectors.conj().T
    kraus = {a: tuple(m @ inv_sqrt for m in family) for a, family in raw.items()}
    return FiniteOperationMeasure(dim=dim, kraus=kraus)


# ---------------------------------------------------------------------------
# realization (probe dilation)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Realization:
    """Probe preparation, coupling unitary, and probe observable.

    The composite basis orders object-major: index (i, m) -> i*probe_dim + m.
    ``probe_projectors`` maps each outcome to its projector on the probe
    space; they are orthogonal and complete.
    """

    object_dim: int
    probe_dim: int
    probe_state: np.ndarray
    unitary: np.ndarray
    probe_projectors: Mapping[Hashable, np.ndarray]

    def __post_init__(self) -> None:
        u = _as_matrix(self.unitary, self.object_dim * self.probe_dim)
        defect = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
        if defect > 1e-10:
            raise DomainError(f"coupling is not unitary: defect {defect:.3e}")
        phi = np.asarray(self.probe_state, dtype=complex)
        if abs(np.linalg.norm(phi) - 1.0) > 1e-10:
            raise DomainError("probe state must be a unit vector")
        total = sum(_as_matrix(p, self.probe_dim)
                    for p in self.probe_projectors.values())
        if np.max(np.abs(total - np.eye(self.probe_dim))) > 1e-10:
            raise CompletenessViolation("probe projectors must resolve the identity")


def dilate(om: FiniteOperationMeasure) -> Realization:
    """Construct a probe realization reproducing the measure exactly.

    The probe space has one basis vector per (outcome, Kraus index)
    pair; the isometry psi -> sum (M_{a,k} psi) (x) |a,k> is completed
    to a unitary by deterministic Gram-Schmidt over the standard basis.
    """
    dim = om.dim
    outcomes = om.outcomes
    rank = max(len(f) for f in om.kraus.values())
    for a, family in om.kraus.items():
        if max(float(np.max(np.abs(m))) for m in family) == 0.0:
            raise DegenerateKraus(f"outcome {a!r} has an all-zero Kraus family")
    probe_dim = len(outcomes) * rank
    total_dim = dim * probe_dim

    isometry = np.zeros((total_dim, dim), dtype=complex)
    for a_idx, a in enumerate(outcomes):
        for k, m in enumerate(om.kraus[a]):
            probe_index = a_idx * rank + k
            # rows (i, probe_index) of column j receive M[i, j]
            isometry[np.arange(dim) * probe_dim + probe_index, :] += m

    unitary = np.zeros((total_dim, total_dim), dtype=complex)
    fixed_columns = np.arange(dim) * probe_dim  # |j> (x) |probe 0>
    unitary[:, fixed_columns] = isometry
    basis = [isometry[:, j] for j in range(dim)]
    free_columns = [c for c in range(total_dim) if c not in set(fixed_columns)]
    filled = 0
    for candidate_index in range(total_dim):
        if filled == len(free_columns):
            break
        v = np.zeros(total_dim, dtype=complex)
        v[candidate_index] = 1.0
        for _ in range(2):  # re-orthogonalize for numerical safety
            for b in basis:
                v = v - b * (np.conj(b) @ v)
        norm = np.linalg.norm(v)
        if norm > 1e-7:
            v = v / norm
            basis.append(v)
            unitary[:, free_columns[filled]] = v
            filled += 1
    if filled != len(free_columns):
        raise DomainError("failed to complete the coupling to a unitary")

    probe_state = np.zeros(probe_dim, dtype=complex)
    probe_state[0] = 1.0
    projectors = {}
    for a_idx, a in enumerate(outcomes):
        p = np.zeros((probe_dim, probe_dim), dtype=complex)
        for k in range(rank):
            idx = a_idx * rank + k
            p[idx, idx] = 1.0
        projectors[a] = p
    return Realization(object_dim=dim, probe_dim=probe_dim,
                       probe_state=probe_state, unitary=unitary,
                       probe_projectors=projectors)


def realization_statistics(realization: Realization, psi):
    """Measurement statistics seen through the probe realization.

    Returns (probabilities, posteriors): probability(a) is the weight of
    the probe projector in U(psi (x) phi), the posterior the partial
    trace of the projected composite state.  Posteriors are omitted for
    outcomes below probability 1e-14.
    """
    v = np.asarray(psi, dtype=complex)
    if abs(np.linalg.norm(v) - 1.0) > 1e-10:
        raise DomainError("object state must be a unit vector")
    composite = realization.unitary @ np.kron(v, realization.probe_state)
    w = composite.reshape(realization.object_dim, realization.probe_dim)
    probabilities = {}
    posteriors = {}
    for a, projector in realization.probe_projectors.items():
        wa = w @ projector
        p = float(np.sum(np.abs(wa) ** 2))
        probabilities[a] = p
        if p > 1e-14:
            posteriors[a] = DensityOperator(_hermitize((wa @ wa.conj().T) / p))
    return probabilities, posteriors


# ---------------------------------------------------------------------------
# plain-text matrix interchange
# ---------------------------------------------------------------------------

def _format_matrix_rows(m: np.ndarray) -> list[str]:
    return [" ".join(f"{value.real:.17g} {value.imag:.17g}" for value in row)
            for row in m]


def write_operation_measure(path, om: FiniteOperationMeasure) -> None:
    """Write a measure as plain text: re/im pairs per cell, row-major."""
    lines = [f"dim {om.dim}", f"outcomes {len(om.outcomes)}"]
    for a in om.outcomes:
        family = om.kraus[a]
        lines.append(f"outcome {a} {len(family)}")
        for m in family:
            lines.extend(_format_matrix_rows(m))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_operation_measure(path) -> FiniteOperationMeasure:
    """Parse the plain-text measure format written by
    :func:`write_operation_measure`; labels are read back as strings
    unless they parse as integers."""
    with open(path, encoding="ascii") as fh:
        rows = [ln.strip() for ln in fh
                if ln.strip() and not ln.lstrip().startswith("#")]
    cursor = 0

    def take() -> str:
        nonlocal cursor
        if cursor >= len(rows):
            raise InputError(f"{path}: unexpected end of file")
        row = rows[cursor]
        cursor += 1
        return row

    def expect(keyword: str, line: str) -> list[str]:
        parts = line.split()
        if not parts or parts[0] != keyword:
            raise InputError(f"{path}: expected '{keyword} ...', got {line!r}")
        return parts[1:]

    dim = int(expect("dim", take())[0])
    n_outcomes = int(expect("outcomes", take())[0])
    kraus: dict[Hashable, tuple[np.ndarray, ...]] = {}
    for _ in range(n_outcomes):
        head = expect("outcome", take())
        if len(head) != 2:
            raise InputError(f"{path}: outcome header needs '<label> <n_kraus>'")
        label: Hashable = head[0]
        try:
            label = int(head[0])
        except ValueError:
            pass
        family = []
        for _ in range(int(head[1])):
            entries = []
            for _ in range(dim):
                values = [float(v) for v in take().split()]
                if len(values) != 2 * dim:
                    raise InputError(
                        f"{path}: matrix row needs {2 * dim} numbers "
                        f"(re/im pairs), got {len(values)}")
                entries.append([complex(values[2 * i], values[2 * i + 1])
                                for i in range(dim)])
            family.append(np.array(entries))
        kraus[label] = tuple(family)
    return FiniteOperationMeasure(dim=dim, kraus=kraus)


def write_realization(path, realization: Realization,
                      roundtrip_residual: float | None = None) -> None:
    """Write a realization (probe state, unitary, projectors) as text."""
    u = realization.unitary
    defect = float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))
    lines = [
        f"object_dim {realization.object_dim}",
        f"probe_dim {realization.probe_dim}",
        "probe_state",
        " ".join(f"{v.real:.17g} {v.imag:.17g}" for v in realization.probe_state),
        f"unitary {u.shape[0]} {u.shape[1]}",
    ]
    lines.extend(_format_matrix_rows(u))
    for a, p in realization.probe_projectors.items():
        lines.append(f"projector {a} {realization.probe_dim} {realization.probe_dim}")
        lines.extend(_format_matrix_rows(p))
    lines.append(f"unitarity_defect {defect:.6e}")
    if roundtrip_residual is not None:
        lines.append(f"roundtrip_residual {roundtrip_residual:.6e}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
