__all__ = ["CommandRunner", "COMMANDS", "build_environment", "cmd_verify", "cmd_couple", "cmd_lln", "cmd_contract",
           "cmd_oracle"]

import itertools
import logging

import numpy as np

from mcrelab.interface import Assumption, ConfigException, UnsupportedException, InsufficientDataException, \
    AssumptionFailure, NumericException, InconclusiveStabilityException
from mcrelab.parallel.pool import ReplicationPool
from mcrelab.parallel.streams import RandomStream, StreamPurpose
from mcrelab.env.process import IidEnv, FiniteMarkovEnv, MovingAverageEnv
from mcrelab.mcre.spec import DriftSpec, MinorSpec, choose_epsilon
from mcrelab.mcre.verify import AssumptionVerifier, CheckRow
from mcrelab.coupling.strategy import MaximalGaussian, SynchronousNoise, doeblin_split
from mcrelab.coupling.run import CouplingRunner, CouplingCurve
from mcrelab.models.interarrival import interarrival_law
from mcrelab.models.queue import QueueBuilder
from mcrelab.models.sgld import QuadraticGradient, LogisticGradient, SgldBuilder
from mcrelab.models.linear import MatrixTable, Innovation, LinearBuilder, StabilityEstimate, DifferenceDecay, \
    difference_decay
from mcrelab.diagnostics.oracle import DiscreteOracle
from mcrelab.diagnostics.rates import RateFit, rate_fit
from mcrelab.diagnostics.lln import LlnReference, LlnResult, lln_experiment, surrogate_reference
from mcrelab.cli.report import RunReport

COMMANDS = ("verify", "couple", "lln", "contract", "oracle")

PROBE_LIMIT = 8


def build_environment(cfg):
    """
    :type cfg: mcrelab.cli.config.IidEnvConfig | FiniteMarkovEnvConfig | MovingAverageEnvConfig
    :rtype: mcrelab.env.process.EnvProcess
    """
    if cfg.kind == "iid":
        values = cfg.values
        probabilities = cfg.probabilities or [1.0 / len(values)] * len(values)
        return IidEnv.discrete(values, probabilities)
    if cfg.kind == "finite_markov":
        return FiniteMarkovEnv(cfg.transition, cfg.values)
    low, high = cfg.innovation.low, cfg.innovation.high
    innovation = (lambda rng, shape: rng.uniform(low, high, size=shape))
    if cfg.coefficients is not None:
        return MovingAverageEnv(cfg.coefficients, innovation, (low, high))
    return MovingAverageEnv.from_function(lambda i: cfg.decay ** abs(i), innovation, cfg.lag, (low, high))


def _first(x):
    x = np.asarray(x, dtype=float)
    return x if x.ndim <= 1 else x[:, 0]


def _phi(cfg):
    """
    :return: phi on batches of states and its declared bound
    """
    if cfg.kind == "min":
        return (lambda x: np.minimum(_first(x), cfg.cap)), cfg.bound or cfg.cap
    if cfg.kind == "clip":
        return (lambda x: np.clip(_first(x), -cfg.cap, cfg.cap)), cfg.bound or cfg.cap
    if cfg.kind == "indicator":
        return (lambda x: (_first(x) == cfg.state).astype(float)), cfg.bound or 1.0
    return (lambda x: np.full(np.shape(_first(x)), cfg.value)), cfg.bound or max(abs(cfg.value), 1.0)


class _Setup:
    """
    Built model pieces shared by the subcommands.
    """
    def __init__(self, kernel, env, drift=None, minor=None, strategy=None, model=None, oracle=None,
                 constants=None):
        self.kernel = kernel
        self.env = env
        self.drift = drift
        self.minor = minor
        self.strategy = strategy
        self.model = model
        self.oracle = oracle
        self.constants = constants or {}


class CommandRunner:
    """
    Runs one subcommand of a resolved config and collects its RunReport.

    The worker pool lives as long as the runner:
      with CommandRunner(config, seed=7, output="out") as runner:
          report = runner.run("verify")
    """
    logger = logging.getLogger("mcrelab.CommandRunner")

    def __init__(self, config, seed, output, threads=1, emit_plots=False):
        """
        :type config: mcrelab.cli.config.LabConfig
        :type seed: int
        :param output: Output root directory
        """
        self._config = config
        self._seed = int(seed)
        self._output = output
        self._emit_plots = emit_plots
        self._pool = ReplicationPool(threads)
        self._experiment = config.experiment

    @classmethod
    def _log(cls, msg):
        cls.logger.debug("CommandRunner: %s", msg)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self._pool.shutdown()

    def _stream(self, purpose):
        return RandomStream(self._seed, purpose)

    def _resolved_config(self):
        resolved = self._config.model_dump(mode="json")
        resolved["seed"] = self._seed
        resolved["output"] = self._output
        return resolved

    def run(self, command):
        """
        :raises: ConfigException, UnsupportedException and validation errors, which
                 leave no report behind
        :rtype: RunReport
        """
        if command not in COMMANDS:
            raise ConfigException("unknown command '{}'".format(command))
        report = RunReport(command, self._resolved_config(), self._seed, self._output, self._emit_plots)
        try:
            getattr(self, "_" + command)(report)
        except (AssumptionFailure, NumericException) as e:
            if isinstance(e, InconclusiveStabilityException):
                report.constants["stability_ci"] = list(e.ci)
            report.failure = str(e)
            self.logger.error("%s failed: %s", command, e)
        report.save()
        self._log(report.summary())
        return report

    # model construction

    def _env_values(self, env, stream):
        if isinstance(env, FiniteMarkovEnv):
            return env.values
        if isinstance(env, IidEnv) and env.support is not None:
            return env.support[0]
        return env.sample_values(1000, 1, stream.generator())[:, 0]

    def _env_weights(self, env):
        if isinstance(env, FiniteMarkovEnv):
            return env.invariant
        if isinstance(env, IidEnv) and env.support is not None:
            return env.support[1]
        return None

    def _setup(self, stream):
        kind = self._config.model.kind
        return getattr(self, "_setup_" + kind)(self._config.model, stream)

    def _setup_queue(self, cfg, stream):
        env = build_environment(self._config.environment)
        law = interarrival_law(cfg.interarrival.kind, **cfg.interarrival.params())
        model = QueueBuilder(self._pool, self._experiment.tolerance).build(
            env, law, cfg.M, cfg.alpha_grid, cfg.alpha_horizon, self._experiment.reps, stream,
            self._experiment.gamma_grid, cfg.theta)
        strategy = model.split_strategy() if cfg.coupling == "split" else model.synchronous_strategy()
        constants = model.constants(self._env_values(env, stream.child(9)))
        constants["alpha_table"] = [list(row) for row in model.alpha_table]
        return _Setup(model.kernel, env, model.drift, model.minor, strategy, model, constants=constants)

    def _sgld_gradient(self, cfg):
        if cfg.gradient == "logistic":
            return LogisticGradient(cfg.rho, cfg.dimension)
        if cfg.g_offset == 0 and cfg.g_scale == 0:
            g = 0.0
        else:
            g = (lambda y: cfg.g_offset + cfg.g_scale * np.asarray(y, dtype=float))
        return QuadraticGradient(lambda y: cfg.delta_offset + cfg.delta_scale * np.asarray(y, dtype=float), g,
                                 cfg.dimension)

    def _setup_sgld(self, cfg, stream):
        env = build_environment(self._config.environment)
        gradient = self._sgld_gradient(cfg)
        y_probes = self._env_values(env, stream.child(9))
        theta_probes = np.array([[v] * cfg.dimension for v in cfg.theta_probes], dtype=float)
        model = SgldBuilder(self._pool).build(cfg.step_size, gradient, env, theta_probes, y_probes,
                                              self._experiment.gamma_grid, self._experiment.reps, stream,
                                              growth=cfg.growth, theta=cfg.theta)
        constants = model.constants()
        if isinstance(gradient, QuadraticGradient):
            mean, variance = gradient.target(y_probes, self._env_weights(env))
            constants.update(target_mean=mean, target_variance=variance)
        return _Setup(model.kernel, env, model.drift, model.minor, MaximalGaussian(), model, constants=constants)

    def _setup_linear(self, cfg, stream):
        env = build_environment(self._config.environment)
        A = MatrixTable(cfg.A, cfg.values)
        d = A.dimension
        B = MatrixTable(cfg.B, cfg.values) if cfg.B is not None else MatrixTable.constant(np.eye(d))
        values = np.unique(self._env_values(env, stream.child(9)))
        model = LinearBuilder(self._pool, self._experiment.tolerance).build(
            A, B, Innovation.gaussian(d, cfg.innovation_scale), env, cfg.block_length, values,
            self._experiment.reps, stream)
        return _Setup(model.kernel, env, model.drift, model=model, constants=model.constants())

    def _setup_oracle(self, cfg, stream):
        env_cfg = self._config.environment
        if env_cfg.kind != "finite_markov":
            raise ConfigException("the oracle model needs a finite_markov environment", key_path="environment.kind")
        oracle = DiscreteOracle(cfg.matrices, env_cfg.transition)
        split = doeblin_split(oracle.kernel)
        strategy = split if cfg.coupling == "split" else SynchronousNoise()
        drift = DriftSpec(lambda x: np.zeros(np.shape(x)), 0.5, 1.0, name="oracle")
        constants = {"mu_star": oracle.mu_star.tolist(),
                     "doeblin_alpha": split.alpha(np.arange(oracle.n_env)).tolist()}
        return _Setup(oracle.kernel, oracle.env, drift, None, strategy, oracle=oracle, constants=constants)

    # probes

    def _state(self, setup, x):
        space = setup.kernel.state_space
        if space.is_vector:
            x = np.asarray(x, dtype=float)
            return np.full(space.dimension, float(x)) if x.ndim == 0 else x
        return int(x) if space.is_discrete else float(x)

    def _drift_probes(self, setup, values):
        if self._experiment.probes is not None:
            return [(p.y, self._state(setup, p.x)) for p in self._experiment.probes]
        kind = self._config.model.kind
        values = list(np.unique(values))[:PROBE_LIMIT]
        if kind == "queue":
            return [(y, w) for y in values for w in (0.0, 1.0, 5.0)]
        if kind == "sgld":
            return [(y, self._state(setup, t)) for y in values for t in (-3.0, 0.0, 3.0)]
        if kind == "oracle":
            return [(y, x) for y in range(setup.oracle.n_env) for x in range(setup.oracle.size)]
        p = setup.kernel.block_length
        d = setup.kernel.state_space.dimension
        blocks = list(itertools.islice(itertools.product(values, repeat=p), PROBE_LIMIT))
        return [(list(block), x) for block in blocks for x in (np.eye(d)[0], 5.0 * np.ones(d))]

    def _probe_states(self, setup):
        kind = self._config.model.kind
        if kind == "oracle":
            return list(range(setup.oracle.size))
        if kind == "queue":
            return [0.0]
        return [np.zeros(setup.kernel.state_space.dimension)]

    # subcommands

    def _verify(self, report):
        stream = self._stream(StreamPurpose.VERIFY)
        setup = self._setup(stream.child(0))
        report.constants.update(setup.constants)
        verifier = AssumptionVerifier(self._pool, self._experiment.tolerance)
        kind = self._config.model.kind
        values = self._env_values(setup.env, stream.child(1))
        probes = self._drift_probes(setup, values)
        reps = self._experiment.reps

        if kind == "linear":
            rows = verifier.multistep_drift_check(setup.kernel, probes, reps, stream.child(2))
        else:
            rows = verifier.drift_check(setup.kernel, setup.drift, probes, reps, stream.child(2))
        for row in rows:
            report.check(row.assumption.value, row.passed)

        if setup.model is not None and getattr(setup.model, "gamma_curve", None) is not None:
            gamma_curve = setup.model.gamma_curve
        else:
            gamma_curve = verifier.gamma_bar_curve(setup.env, setup.drift, self._experiment.gamma_grid, reps,
                                                   stream.child(3))
        # curves are judged at their largest horizon
        report.check(Assumption.LONG_TIME_CONTRACTIVITY.value, gamma_curve.passed)
        rows += gamma_curve.rows()
        report.constants["gamma_bar_curve"] = {"estimate": gamma_curve.estimate, "ci": list(gamma_curve.ci)}
        minor = setup.minor
        if kind == "oracle" and gamma_curve.passed:
            gamma_bar = gamma_curve.ci[1]
            minor = MinorSpec(choose_epsilon(gamma_bar), doeblin_split(setup.kernel).alpha, gamma_bar=gamma_bar)

        # block drifts have no single-value small sets; linear models report stability instead
        if minor is not None:
            smallness = verifier.smallness_curve(setup.env, minor, minor.theta, self._experiment.smallness_grid,
                                                 reps, stream.child(4))
            rows += smallness.rows()
            report.check(Assumption.SMALLNESS.value, smallness.passed)
            report.constants["smallness_constant_alpha"] = smallness.constant
            small_set = verifier.small_set_check(setup.drift, minor.epsilon, values, self._probe_states(setup),
                                                 setup.kernel.state_space)
            report.check(small_set.assumption.value, small_set.passed)
            rows.append(small_set)
        if kind == "linear":
            estimate = setup.model.stability
            rows.append(CheckRow(Assumption.STABILITY, "p={}".format(setup.model.p), estimate.mean, estimate.stderr,
                                 0.0, estimate.passed))
            report.check(Assumption.STABILITY.value, estimate.passed)
            report.write_csv("stability", StabilityEstimate.CSV_HEADER, [estimate.csv_row()])

        report.write_csv("checks", CheckRow.CSV_HEADER, [row.csv_row() for row in rows])
        report.write_csv("gamma_bar", ("n", "estimate", "ci_low", "ci_high"),
                         [(p.n, p.estimate, p.ci_low, p.ci_high) for p in gamma_curve.points])

    def _couple(self, report):
        kind = self._config.model.kind
        if kind == "linear":
            raise UnsupportedException("linear models have no exact coalescence; use the contract command")
        stream = self._stream(StreamPurpose.COUPLE)
        setup = self._setup(stream.child(0))
        report.constants.update(setup.constants)
        starts = self._experiment.starts
        if len(starts) != 2:
            raise ConfigException("couple needs exactly two starts", key_path="experiment.starts")
        x1, x2 = (self._state(setup, x) for x in starts)
        runner = CouplingRunner(self._pool)
        grid = self._experiment.n_grid
        curve = runner.coupling_prob_curve(setup.kernel, setup.strategy, x1, x2, setup.env, grid,
                                           self._experiment.reps, stream.child(1))
        report.write_csv("coupling", CouplingCurve.CSV_HEADER, curve.rows())
        report.constants["tv_bound_final"] = float(curve.tv_bounds[-1])

        try:
            fit = rate_fit(curve, self._experiment.rate_saturation)
            report.constants["rate_fit"] = fit.as_dict()
            report.write_csv("rate_fit", RateFit.CSV_HEADER, fit.rows())
        except InsufficientDataException as e:
            report.constants["rate_fit"] = None
            self._log("no rate fit: {}".format(e))

        if setup.oracle is not None:
            exact = np.abs(setup.oracle.laws(x1, grid) - setup.oracle.laws(x2, grid)).sum(axis=1)
            report.write_csv("exact_tv", ("n", "exact_tv", "tv_bound_ci_high"),
                             [(p.n, e, 2.0 * p.ci_high) for p, e in zip(curve.points, exact)])
            report.check("oracle_domination", all(2.0 * p.ci_high >= e - 1e-12 for p, e in zip(curve.points, exact)))
        elif setup.minor is not None:
            visits = runner.mean_visits(setup.kernel, setup.strategy, x1, x2, setup.env, setup.drift, setup.minor,
                                        self._experiment.visit_window, self._experiment.visit_reps,
                                        stream.child(2))
            report.constants["mean_visits"] = {"window": self._experiment.visit_window, "mean": visits}

        if self._experiment.tv_threshold is not None:
            report.check("tv_bound", curve.tv_bounds[-1] <= self._experiment.tv_threshold)

    def _lln(self, report):
        stream = self._stream(StreamPurpose.LLN)
        setup = self._setup(stream.child(0))
        report.constants.update(setup.constants)
        phi, bound = _phi(self._experiment.phi)
        x0 = self._state(setup, self._experiment.starts[0])
        probes = self._experiment.phi_probes
        if probes is None and setup.oracle is not None:
            probes = list(range(setup.oracle.size))
        elif probes is None:
            probes = self._probe_states(setup) + [self._state(setup, v) for v in (1.0, 10.0, 100.0)]
        else:
            probes = [self._state(setup, v) for v in probes]

        # averages run on single steps, not on the blocks of a multistep kernel
        kernel = setup.model.base_kernel if self._config.model.kind == "linear" else setup.kernel
        if setup.oracle is not None:
            reference = LlnReference.from_oracle(setup.oracle, phi)
        elif self._experiment.phi.kind == "constant":
            reference = LlnReference(self._experiment.phi.value, True)
        else:
            reference = surrogate_reference(kernel, setup.env, x0, phi, self._experiment.reference_steps,
                                            stream.child(1), self._experiment.reference_chains, pool=self._pool)
        result = lln_experiment(kernel, setup.env, x0, phi, self._experiment.lln_grid,
                                self._experiment.lln_reps, self._experiment.orders, reference, stream.child(2),
                                bound, probes, self._pool)
        report.write_csv("lln", LlnResult.CSV_HEADER, result.rows())
        report.constants["reference"] = reference.as_dict()
        report.constants["lln_decreasing"] = result.decreasing()

    def _contract(self, report):
        if self._config.model.kind != "linear":
            raise UnsupportedException("the contract command applies to linear models")
        stream = self._stream(StreamPurpose.CONTRACT)
        setup = self._setup(stream.child(0))
        model = setup.model
        report.constants.update(setup.constants)
        report.write_csv("stability", StabilityEstimate.CSV_HEADER, [model.stability.csv_row()])
        report.check("stability", model.stability.passed)

        starts = self._experiment.starts
        if len(starts) != 2:
            raise ConfigException("contract needs exactly two starts", key_path="experiment.starts")
        x1, x2 = (self._state(setup, x) for x in starts)
        decay = difference_decay(model, x1, x2, self._experiment.contract_steps, self._experiment.contract_reps,
                                 stream.child(1), self._pool)
        report.write_csv("difference", DifferenceDecay.CSV_HEADER, decay.rows())
        scale = 1.0 + float(decay.norms.max())
        report.constants["max_product_deviation"] = decay.max_deviation
        report.check("difference_matches_product", decay.max_deviation <= 1e-8 * scale)

    def _oracle(self, report):
        if self._config.model.kind != "oracle":
            raise UnsupportedException("the oracle command needs an oracle model")
        setup = self._setup(self._stream(StreamPurpose.ORACLE))
        oracle = setup.oracle
        report.constants.update(setup.constants)
        grid = self._experiment.oracle_grid
        starts = [int(x) for x in self._experiment.starts]
        laws = {x: oracle.laws(x, grid) for x in starts}
        rows = []
        for x in starts:
            tvs = np.abs(laws[x] - oracle.mu_star).sum(axis=1)
            rows += [(n, x, tv) for n, tv in zip(grid, tvs)]
        report.write_csv("oracle_tv", ("n", "start", "exact_tv"), rows)
        gaps = np.zeros(len(grid))
        for a, b in itertools.combinations(starts, 2):
            gaps = np.maximum(gaps, np.abs(laws[a] - laws[b]).max(axis=1))
        report.write_csv("oracle_gap", ("n", "start_gap"), list(zip(grid, gaps)))
        report.constants["start_gap_final"] = float(gaps[-1])
        if self._experiment.tv_threshold is not None:
            final = max(float(np.abs(laws[x][-1] - oracle.mu_star).sum()) for x in starts)
            report.check("oracle_tv", final <= self._experiment.tv_threshold)


def _command(name):
    def _run(config, seed, output, threads=1, emit_plots=False):
        with CommandRunner(config, seed, output, threads, emit_plots) as runner:
            return runner.run(name)
    _run.__name__ = "cmd_" + name
    _run.__doc__ = ":rtype: mcrelab.cli.report.RunReport"
    return _run


cmd_verify = _command("verify")
cmd_couple = _command("couple")
cmd_lln = _command("lln")
cmd_contract = _command("contract")
cmd_oracle = _command("oracle")
