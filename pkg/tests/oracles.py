"""Slow, independent reference implementations used only by the tests."""

import numpy as np


def pairwise_filter(points):
    """O(n^2) non-dominated filter: keep the first copy of each undominated point."""
    pts = [tuple(p) for p in np.asarray(points, dtype=float)]
    kept = []
    for i, p in enumerate(pts):
        dominated = any(
            all(q[m] >= p[m] for m in range(len(p))) and any(q[m] > p[m] for m in range(len(p)))
            for q in pts
        )
        if not dominated and p not in pts[:i]:
            kept.append(p)
    return kept


def monte_carlo_hv(front, samples, rng, chunk=100_000):
    """Fraction of uniform points in the unit cube dominated by ``front``, with its standard error."""
    front = np.asarray(front, dtype=float)
    M = front.shape[1]
    hits = 0
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        u = rng.random((n, M))
        covered = np.zeros(n, dtype=bool)
        for p in front:
            covered |= np.all(u <= p, axis=1)
        hits += int(covered.sum())
        done += n
    p = hits / samples
    return p, np.sqrt(p * (1 - p) / samples)


def exact_rank_sum_p(n1, n2, u_obs):
    """Two-sided exact p-value of the U statistic for untied samples.

    Counts rank subsets by their sum with a dynamic program over ranks,
    which is independent of the enumeration used in the package.
    """
    N = n1 + n2
    max_sum = N * (N + 1) // 2
    # ways[k][s]: subsets of size k of the ranks seen so far with sum s
    ways = np.zeros((n1 + 1, max_sum + 1), dtype=object)
    ways[0][0] = 1
    for r in range(1, N + 1):
        for k in range(min(r, n1), 0, -1):
            ways[k][r:] = ways[k][r:] + ways[k - 1][: max_sum + 1 - r]
    dist = ways[n1]
    offset = n1 * (n1 + 1) // 2
    total = sum(dist)
    lo = sum(dist[s] for s in range(max_sum + 1) if s - offset <= u_obs)
    hi = sum(dist[s] for s in range(max_sum + 1) if s - offset >= u_obs)
    return min(1.0, 2 * min(lo, hi) / total)


def reference_search(instance, config, evaluations):
    """Plain-Python version of the search loop, driven by the public operators.

    Consumes the random stream in the same order as the compiled engine, so
    after ``evaluations`` evaluations both must hold identical populations,
    reference points and archives.  Returns ``(population, objectives, z,
    archive_points, generation)``.
    """
    from moeadsps.landscape import evaluate, random_genotype
    from moeadsps.scalarize import build_neighborhoods, generate_weights
    from moeadsps.sps import SpsHistory, select, update_utilities
    from moeadsps.variation import bit_flip_mutation, mating_select, two_point_crossover

    def g(f, w, z):
        return max(wm * abs(zm - fm) for wm, zm, fm in zip(w, z, f))

    def archive_add(archive, f):
        if any(all(a[m] >= f[m] for m in range(len(f))) for a in archive):
            return archive
        return [a for a in archive if not all(a[m] <= f[m] for m in range(len(f)))] + [f]

    rng = np.random.default_rng(config.seed)
    weights = generate_weights(config.mu, instance.M, config.weight_method)
    W = weights.vectors
    B = build_neighborhoods(weights, config.T)
    rate = 1.0 / instance.N if config.mutation_rate is None else config.mutation_rate
    pop, objs, archive = [], [], []
    for _ in range(config.mu):
        x = random_genotype(instance.N, rng)
        pop.append(x)
        objs.append(list(evaluate(instance, x)))
        archive = archive_add(archive, objs[-1])
    z = [max(f[m] for f in objs) + 1e-6 for m in range(instance.M)]
    history = SpsHistory.start([g(objs[j], W[j], z) for j in range(config.mu)])
    count = config.mu
    generation = 0
    while count < evaluations:
        chosen = select(config.sps, config.mu, config.lam, weights.boundary_indices, rng, history, generation)
        for i in chosen:
            if count >= evaluations:
                break
            p1, p2 = mating_select(i, B[i], pop, rng)
            child = bit_flip_mutation(two_point_crossover(p1, p2, rng), rate, rng)
            f = list(evaluate(instance, child))
            count += 1
            archive = archive_add(archive, f)
            z = [max(zm, fm + 1e-6) for zm, fm in zip(z, f)]
            for k in B[i]:
                if g(f, W[k], z) < g(objs[k], W[k], z):
                    pop[k] = child.copy()
                    objs[k] = f
        else:
            generation += 1
            if config.sps == "dra":
                history = update_utilities(history, [g(objs[j], W[j], z) for j in range(config.mu)])
    return np.array(pop), np.array(objs), np.array(z), np.array(archive), generation


def replacement_events(state, evaluations):
    """Step ``state`` one evaluation at a time and log every incumbent change.

    Yields ``(k, old_f, new_f, z)`` where ``z`` is the reference point in
    force when the replacement decision was taken.
    """
    from moeadsps.engine import step_evaluations

    while state.evaluations < evaluations:
        before = state.objectives.copy()
        step_evaluations(state, 1)
        changed = np.nonzero(np.any(state.objectives != before, axis=1))[0]
        for k in changed:
            yield int(k), before[k].copy(), state.objectives[k].copy(), state.z.copy()
