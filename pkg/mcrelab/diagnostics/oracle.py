__all__ = ["DiscreteOracle", "OracleResult", "oracle_exact"]

import numpy as np
from scipy import linalg

from mcrelab.interface import ValidationException
from mcrelab.env.process import FiniteMarkovEnv, invariant_law, is_primitive
from mcrelab.mcre.kernel import DiscreteKernel


class DiscreteOracle:
    """
    Finite chain X driven by a finite Markov environment Y, with the joint chain
    on X x Y: J[(x, y), (x', y')] = Q(y)[x, x'] P[y, y'].

    Joint states are indexed x * n_env + y.
    """
    ROW_TOLERANCE = 1e-12

    def __init__(self, matrices, env_transition):
        """
        :param matrices: Q(y) for every environment state, shape (n_env, S, S)
        :param env_transition: Environment transition matrix, shape (n_env, n_env)
        """
        self.kernel = DiscreteKernel(matrices, name="oracle")
        self.env = FiniteMarkovEnv(env_transition)
        if self.env.n_states != self.kernel.n_env:
            raise ValidationException("{} environment states but {} transition matrices"
                                      .format(self.env.n_states, self.kernel.n_env))
        q = self.kernel.matrices
        p = self.env.transition
        self.joint = np.einsum("yab,yc->aybc", q, p).reshape(self.size * self.n_env, self.size * self.n_env)
        if np.max(np.abs(self.joint.sum(axis=1) - 1.0)) > self.ROW_TOLERANCE:
            raise ValidationException("joint transition rows do not sum to 1")
        if not is_primitive(self.joint):
            raise ValidationException("the joint chain is not irreducible and aperiodic")
        self.joint_invariant = self._solve_invariant()
        self.mu_star = self.joint_invariant.reshape(self.size, self.n_env).sum(axis=1)

    @property
    def size(self):
        return self.kernel.size

    @property
    def n_env(self):
        return self.kernel.n_env

    def _solve_invariant(self):
        n = self.joint.shape[0]
        a = np.vstack((self.joint.T - np.eye(n), np.ones((1, n))))
        b = np.zeros(n + 1)
        b[-1] = 1.0
        pi = linalg.lstsq(a, b)[0]
        pi = np.clip(pi, 0.0, None)
        return pi / pi.sum()

    def start(self, x0):
        """
        delta_{x0} (x) invariant environment law, as a joint row vector.
        """
        x0 = int(x0)
        if not 0 <= x0 < self.size:
            raise ValidationException("start state {} outside 0..{}".format(x0, self.size - 1))
        law = np.zeros((self.size, self.n_env))
        law[x0] = self.env.invariant
        return law.ravel()

    def joint_laws(self, x0, n_grid):
        grid = [int(n) for n in n_grid]
        if not grid or grid[0] < 0 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValidationException("horizons must be non-negative and strictly increasing")
        law = self.start(x0)
        out = []
        t = 0
        for n in grid:
            for _ in range(n - t):
                law = law @ self.joint
            t = n
            out.append(law)
        return np.array(out)

    def laws(self, x0, n_grid):
        """
        :return: Exact X-marginals at every horizon, shape (len(n_grid), S)
        """
        joint = self.joint_laws(x0, n_grid)
        return joint.reshape(len(joint), self.size, self.n_env).sum(axis=2)

    def law(self, x0, n):
        return self.laws(x0, [n])[0]

    def tv(self, x0, n):
        return float(np.abs(self.law(x0, n) - self.mu_star).sum())

    def expectation(self, phi):
        """
        Exact integral of phi against mu*.
        """
        values = np.asarray(phi(np.arange(self.size)), dtype=float)
        return float(self.mu_star @ values)

    def homogeneous_invariant(self):
        """
        Invariant law of Q when every Q(y) is the same matrix.
        """
        q = self.kernel.matrices
        if not np.allclose(q, q[:1], rtol=0.0, atol=self.ROW_TOLERANCE):
            raise ValidationException("Q(y) depends on y")
        return invariant_law(q[0])


class OracleResult:
    def __init__(self, law, mu_star, tv):
        self.law = law
        self.mu_star = mu_star
        self.tv = float(tv)


def oracle_exact(oracle, x0, n):
    """
    :type oracle: DiscreteOracle
    :rtype: OracleResult
    """
    law = oracle.law(x0, n)
    return OracleResult(law, oracle.mu_star, np.abs(law - oracle.mu_star).sum())
