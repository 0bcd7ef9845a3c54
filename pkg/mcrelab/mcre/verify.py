__all__ = [
    "CheckRow", "CurveReport", "AssumptionVerifier", "drift_check", "multistep_drift_check",
    "gamma_bar_curve", "smallness_curve", "small_set_check",
]

import logging

import numpy as np

from mcrelab.interface import Assumption, ValidationException, NumericException
from mcrelab.parallel.pool import serial_pool
from mcrelab.parallel.streams import StreamPurpose, as_stream
from mcrelab.mcre.estimate import mean_stderr, log1mexp, log_mean_exp_curve
from mcrelab.mcre.spec import DriftSpec, MinorSpec, small_set_radius


class CheckRow:
    """
    One verified inequality, serialized as a CSV row.
    """
    CSV_HEADER = ("assumption", "probe", "estimate", "stderr", "bound", "pass")

    def __init__(self, assumption, probe, estimate, stderr, bound, passed):
        """
        :type assumption: Assumption
        :param probe: Human readable probe or horizon label
        :type probe: str
        """
        self.assumption = assumption
        self.probe = probe
        self.estimate = float(estimate)
        self.stderr = float(stderr)
        self.bound = float(bound)
        self.passed = bool(passed)

    def csv_row(self):
        return (self.assumption.value, self.probe, self.estimate, self.stderr, self.bound, self.passed)

    def __repr__(self):
        return "CheckRow({}, {}, estimate={:.6g}, bound={:.6g}, pass={})".format(
            self.assumption.value, self.probe, self.estimate, self.bound, self.passed)


class CurveReport:
    """
    Finite-horizon surrogate of an asymptotic condition: estimates per horizon
    plus a pass flag decided on the largest horizon.
    """
    def __init__(self, assumption, points, bound, passed, constant=None):
        """
        :type assumption: Assumption
        :type points: list[mcrelab.mcre.estimate.CurvePoint]
        :param bound: Threshold the terminal estimate is compared against
        :param constant: Constant value of the integrand when it is deterministic
        """
        self.assumption = assumption
        self.points = points
        self.bound = float(bound)
        self.passed = bool(passed)
        self.constant = constant

    @property
    def terminal(self):
        return self.points[-1]

    @property
    def estimate(self):
        return self.terminal.estimate

    @property
    def ci(self):
        return self.terminal.ci_low, self.terminal.ci_high

    def rows(self):
        """
        :rtype: list[CheckRow]
        """
        last = len(self.points) - 1
        return [CheckRow(self.assumption, "n={}".format(p.n), p.estimate, p.stderr, self.bound,
                         self.passed if i == last else p.ci_high < self.bound)
                for i, p in enumerate(self.points)]


def _check_grid(n_grid):
    grid = [int(n) for n in n_grid]
    if not grid or grid[0] < 1 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValidationException("horizons must be positive and strictly increasing, got {}".format(n_grid))
    return grid


class AssumptionVerifier:
    """
    Monte-Carlo verifiers of the drift, contractivity, smallness and small-set conditions.

    Replications are fanned out on a ReplicationPool; every probe or curve uses
    its own child stream, so reports are reproducible for a given master seed.
    """
    logger = logging.getLogger("mcrelab.AssumptionVerifier")

    MIN_REPS = 1000

    def __init__(self, pool=None, tolerance=3.0, n_boot=500, confidence=0.95):
        """
        :type pool: mcrelab.parallel.pool.ReplicationPool | None
        :param tolerance: Drift pass tolerance in standard errors
        :param n_boot: Bootstrap resamples for curve CIs
        :param confidence: Confidence level of curve CIs
        """
        self._pool = pool or serial_pool()
        self._tolerance = float(tolerance)
        self._n_boot = int(n_boot)
        self._confidence = float(confidence)

    @classmethod
    def enable_debug_log(cls):
        cls.logger.setLevel(logging.DEBUG)

    @classmethod
    def _log(cls, msg):
        cls.logger.debug("AssumptionVerifier: %s", msg)

    def _check_reps(self, reps):
        if reps < self.MIN_REPS:
            raise ValidationException("at least {} replications required, got {}".format(self.MIN_REPS, reps))

    def drift_check(self, kernel, drift, probes, reps, rng, assumption=Assumption.DRIFT):
        """
        Estimate [Q(y)V](x) at every probe and compare it to gamma(y)V(x) + K(y).

        :type kernel: mcrelab.mcre.kernel.RandomKernel
        :type drift: DriftSpec
        :param probes: (y, x) pairs; y is a block of values for multistep kernels
        :type reps: int
        :rtype: list[CheckRow]
        :raises: NumericException if V is not finite at a sampled successor
        """
        self._check_reps(reps)
        stream = as_stream(rng, StreamPurpose.VERIFY)
        rows = []
        for i, (y, x) in enumerate(probes):
            y_value = np.asarray(y, dtype=float)

            def _body(count, gen, x=x, y_value=y_value):
                successors = kernel.step(y_value, kernel.state_space.batch(x, count), gen)
                with np.errstate(over="ignore"):
                    values = drift.V(successors)
                bad = ~np.isfinite(values)
                if np.any(bad):
                    raise NumericException("V is not finite at a sampled successor", successors[bad][0])
                return values

            estimate, stderr = mean_stderr(self._pool.map_chunks(_body, reps, stream.child(i)))
            bound = drift.bound(y, x, kernel.state_space)
            passed = estimate <= bound + self._tolerance * stderr
            label = "y={},x={}".format(np.round(y_value, 6).tolist(), np.round(np.asarray(x, dtype=float), 6).tolist())
            rows.append(CheckRow(assumption, label, estimate, stderr, bound, passed))
            self._log("{} {}: {:.6g} vs {:.6g} -> {}".format(assumption.value, label, estimate, bound, passed))
        return rows

    def multistep_drift_check(self, kernel, probes, reps, rng):
        """
        Block drift [Q(y_p)...Q(y_1)V](x) <= gamma(y_1..y_p)V(x) + K, plus the
        one-step bound [Q(y)V](x) <= K V(x) + K of the base kernel at y = y_1.

        :type kernel: mcrelab.mcre.kernel.MultistepKernel
        :param probes: (block, x) pairs
        :rtype: list[CheckRow]
        """
        if kernel.drift is None:
            raise ValidationException("multistep kernel carries no block drift data")
        stream = as_stream(rng, StreamPurpose.VERIFY)
        rows = self.drift_check(kernel, kernel.drift, probes, reps, stream.child(0), Assumption.MULTISTEP_DRIFT)
        if kernel.one_step_bound is not None:
            bound = kernel.one_step_bound
            one_step = DriftSpec(kernel.drift.V, bound, bound, name="one_step")
            base_probes = [(np.asarray(block, dtype=float)[0], x) for block, x in probes]
            rows += self.drift_check(kernel.base, one_step, base_probes, reps, stream.child(1),
                                     Assumption.ONE_STEP_BOUND)
        return rows

    def gamma_bar_curve(self, env, drift, n_grid, reps, rng):
        """
        Per horizon n, E^{1/n}[K(Y_0) prod_{k=1..n} gamma(Y_k)] computed in log-space
        over joint environment paths; blocks of block_length values replace Y_k for
        block drifts.

        :type env: mcrelab.env.process.EnvProcess
        :type drift: DriftSpec
        :rtype: CurveReport
        """
        self._check_reps(reps)
        grid = _check_grid(n_grid)
        p = drift.block_length
        stream = as_stream(rng, StreamPurpose.VERIFY)

        def _draw(cursor):
            return cursor.advance() if p == 1 else cursor.take(p)

        def _body(count, gen):
            cursor = env.cursor(count, gen)
            total = np.log(drift.K(_draw(cursor)))
            out = np.empty((count, len(grid)))
            j = 0
            for k in range(1, grid[-1] + 1):
                total = total + np.log(drift.gamma(_draw(cursor)))
                if k == grid[j]:
                    out[:, j] = total
                    j += 1
            return out

        log_terms = self._pool.map_chunks(_body, reps, stream.child(0))
        points = log_mean_exp_curve(log_terms, grid, grid, stream.child(1).generator(),
                                    self._n_boot, self._confidence)
        passed = points[-1].ci_high < 1.0
        self._log("gamma_bar at n={}: {:.6g} (upper {:.6g}) -> {}".format(
            grid[-1], points[-1].estimate, points[-1].ci_high, passed))
        return CurveReport(Assumption.LONG_TIME_CONTRACTIVITY, points, 1.0, passed)

    def smallness_curve(self, env, alpha, theta, n_grid, reps, rng):
        """
        Per horizon n, E^{1/n^theta}[alpha(Y_0)^n].

        A constant alpha < 1 passes outright since a^{n^{1-theta}} -> 0; otherwise
        the pass flag is the heuristic "non-increasing and last value < 0.5".

        :param alpha: alpha(y), a constant, or a MinorSpec
        :type theta: float
        :rtype: CurveReport
        """
        if not 0 < theta < 1:
            raise ValidationException("theta must lie in (0, 1), got {}".format(theta))
        self._check_reps(reps)
        grid = _check_grid(n_grid)
        if not isinstance(alpha, MinorSpec):
            alpha = MinorSpec(1.0, alpha, theta=theta)
        stream = as_stream(rng, StreamPurpose.VERIFY)

        y0 = self._pool.map_chunks(lambda count, gen: env.sample_values(count, 1, gen)[:, 0], reps, stream.child(0))
        # 1 - alpha may lie below double precision, so alpha is carried as log(1 - alpha)
        log_mass = alpha.log_mass(y0)
        if np.any(log_mass > 0) or np.any(np.isnan(log_mass)) or np.any(np.isinf(log_mass)):
            raise ValidationException("alpha(y) must lie in [0, 1)")
        log_alpha = log1mexp(log_mass)
        horizons = np.asarray(grid, dtype=float)
        log_terms = log_alpha[:, None] * horizons[None, :]
        points = log_mean_exp_curve(log_terms, grid, horizons ** theta, stream.child(1).generator(),
                                    self._n_boot, self._confidence)

        estimates = np.array([p.estimate for p in points])
        constant = float(-np.expm1(log_mass[0])) if np.ptp(log_mass) == 0 else None
        if constant is not None:
            passed = True
        else:
            passed = bool(np.all(np.diff(estimates) <= 1e-12) and estimates[-1] < 0.5)
        self._log("smallness at n={}: {:.6g} (constant alpha: {}) -> {}".format(
            grid[-1], estimates[-1], constant, passed))
        return CurveReport(Assumption.SMALLNESS, points, 0.5, passed, constant)

    def small_set_check(self, drift, epsilon, env_values, probe_states, state_space):
        """
        Non-emptiness of V^-1([0, R(y)]): min of V over the probe states must not
        exceed the smallest radius over the given environment values.

        :rtype: CheckRow
        """
        states = np.stack([np.asarray(x, dtype=float) for x in probe_states])
        if state_space.is_discrete:
            states = states.astype(int)
        min_v = float(np.min(drift.V(states)))
        radii = np.atleast_1d(small_set_radius(drift, epsilon, np.asarray(env_values, dtype=float)))
        worst = int(np.argmin(radii))
        y = float(np.asarray(env_values, dtype=float).ravel()[worst])
        return CheckRow(Assumption.SMALL_SET, "y={}".format(round(y, 6)), min_v, 0.0, radii[worst],
                        min_v <= radii[worst])


def drift_check(kernel, drift, probes, reps, rng, tolerance=3.0, pool=None):
    return AssumptionVerifier(pool, tolerance).drift_check(kernel, drift, probes, reps, rng)


def multistep_drift_check(kernel, probes, reps, rng, tolerance=3.0, pool=None):
    return AssumptionVerifier(pool, tolerance).multistep_drift_check(kernel, probes, reps, rng)


def gamma_bar_curve(env, drift, n_grid, reps, rng, pool=None):
    return AssumptionVerifier(pool).gamma_bar_curve(env, drift, n_grid, reps, rng)


def smallness_curve(env, alpha, theta, n_grid, reps, rng, pool=None):
    return AssumptionVerifier(pool).smallness_curve(env, alpha, theta, n_grid, reps, rng)


def small_set_check(drift, epsilon, env_values, probe_states, state_space):
    return AssumptionVerifier().small_set_check(drift, epsilon, env_values, probe_states, state_space)
