#include "potlab/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "potlab/parallel.hpp"

namespace potlab {

double dist_to_registry(const Potential& V, const OptimalSetRegistry& reg, int* nearest) {
    if (reg.entries.empty()) throw EmptyRegistry("dist_to_registry: registry has no entries");
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (std::size_t e = 0; e < reg.entries.size(); ++e) {
        double d = l1_distance(V.field, reg.entries[e].V.field);
        if (d < best) {
            best = d;
            arg = static_cast<int>(e);
        }
    }
    if (nearest) *nearest = arg;
    return best;
}

namespace {

// Distributes `budget` mass over the capacity vector in shuffled random
// bites; a final exact bite lands the total, a deterministic top-up pass
// covers the rare underfill. amounts[i] <= caps[i], sum == budget exactly up
// to rounding.
void random_fill(const std::vector<double>& caps, double budget, Rng& rng,
                 std::vector<double>& amounts, std::vector<int>& order) {
    amounts.assign(caps.size(), 0.0);
    order.resize(caps.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    rng.shuffle(order);
    double remaining = budget;
    for (int idx : order) {
        if (remaining <= 0.0) return;
        auto i = static_cast<std::size_t>(idx);
        double bite = caps[i] * rng.uniform();
        if (bite >= remaining) {
            amounts[i] = remaining; // exact landing
            return;
        }
        amounts[i] = bite;
        remaining -= bite;
    }
    for (int idx : order) { // top-up: random pass left a remainder
        auto i = static_cast<std::size_t>(idx);
        double room = caps[i] - amounts[i];
        if (room <= 0.0) continue;
        if (room >= remaining) {
            amounts[i] += remaining;
            return;
        }
        amounts[i] += room;
        remaining -= room;
    }
    throw ShellInfeasible("shell sampling: capacity exhausted before the budget landed");
}

Potential assemble_shell(const GridDomain& grid, const RegistryEntry& base, double delta,
                         const std::vector<int>& inside, const std::vector<double>& dec,
                         const std::vector<int>& outside, const std::vector<double>& inc) {
    ScalarField f = base.V.field;
    const double a = grid.cell_area();
    for (std::size_t i = 0; i < inside.size(); ++i)
        f.values[static_cast<std::size_t>(inside[i])] -= dec[i] / a;
    for (std::size_t i = 0; i < outside.size(); ++i)
        f.values[static_cast<std::size_t>(outside[i])] += inc[i] / a;
    Potential V = Potential::checked(std::move(f), base.V.target_mass);
    double d = l1_distance(V.field, base.V.field);
    if (std::abs(d - delta) > 1e-12 * grid.measure())
        throw Error("shell sample distance audit failed: " + std::to_string(d - delta));
    return V;
}

void shell_supports(const GridDomain& grid, const RegistryEntry& base, double delta,
                    std::vector<int>& inside, std::vector<double>& caps_in,
                    std::vector<int>& outside, std::vector<double>& caps_out) {
    const double a = grid.cell_area();
    inside.clear();
    caps_in.clear();
    outside.clear();
    caps_out.clear();
    for (int k = 0; k < grid.size(); ++k) {
        double v = base.V.field.values[static_cast<std::size_t>(k)];
        if (v > 0.0) {
            inside.push_back(k);
            caps_in.push_back(v * a);
        } else {
            outside.push_back(k);
            caps_out.push_back(a);
        }
    }
    double cap_in_total = 0.0, cap_out_total = 0.0;
    for (double c : caps_in) cap_in_total += c;
    for (double c : caps_out) cap_out_total += c;
    if (delta / 2.0 > cap_in_total || delta / 2.0 > cap_out_total)
        throw ShellInfeasible("shell radius exceeds movable mass on one side");
}

} // namespace

Potential sample_shell(const GridDomain& grid, const OptimalSetRegistry& reg, int base_index,
                       double delta, Rng& rng) {
    if (reg.entries.empty()) throw EmptyRegistry("sample_shell");
    if (base_index < 0 || base_index >= static_cast<int>(reg.entries.size()))
        throw Error("sample_shell: base index out of range");
    if (!(delta > 0.0)) throw Error("sample_shell: delta must be positive");
    const auto& base = reg.entries[static_cast<std::size_t>(base_index)];

    std::vector<int> inside, outside, order;
    std::vector<double> caps_in, caps_out, dec, inc;
    shell_supports(grid, base, delta, inside, caps_in, outside, caps_out);

    const int max_attempts = 200;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        random_fill(caps_in, delta / 2.0, rng, dec, order);
        random_fill(caps_out, delta / 2.0, rng, inc, order);
        Potential V = assemble_shell(grid, base, delta, inside, dec, outside, inc);
        int nearest = -1;
        dist_to_registry(V, reg, &nearest);
        if (nearest == base_index) return V;
        // another optimal set is closer; this draw does not probe the shell
        // around base_index
    }
    throw ShellInfeasible("sample_shell: every draw landed closer to a different entry");
}

Potential shell_linearized_step(const GridDomain& grid, const RegistryEntry& base, double delta,
                                const ScalarField& u) {
    if (u.grid != &grid) throw GridMismatch("shell_linearized_step");
    std::vector<int> inside, outside;
    std::vector<double> caps_in, caps_out;
    shell_supports(grid, base, delta, inside, caps_in, outside, caps_out);

    auto u2 = [&](int k) {
        double v = u.values[static_cast<std::size_t>(k)];
        return v * v;
    };
    std::vector<std::size_t> in_idx(inside.size()), out_idx(outside.size());
    for (std::size_t i = 0; i < in_idx.size(); ++i) in_idx[i] = i;
    for (std::size_t i = 0; i < out_idx.size(); ++i) out_idx[i] = i;
    // removal hurts lambda least where u^2 is smallest; addition helps most
    // where u^2 is largest
    std::sort(in_idx.begin(), in_idx.end(), [&](std::size_t a, std::size_t b) {
        double ua = u2(inside[a]), ub = u2(inside[b]);
        return ua != ub ? ua < ub : inside[a] < inside[b];
    });
    std::sort(out_idx.begin(), out_idx.end(), [&](std::size_t a, std::size_t b) {
        double ua = u2(outside[a]), ub = u2(outside[b]);
        return ua != ub ? ua > ub : outside[a] < outside[b];
    });

    std::vector<double> dec(inside.size(), 0.0), inc(outside.size(), 0.0);
    double rem = delta / 2.0;
    for (std::size_t i : in_idx) {
        double take = std::min(caps_in[i], rem);
        dec[i] = take;
        rem -= take;
        if (rem <= 0.0) break;
    }
    rem = delta / 2.0;
    for (std::size_t i : out_idx) {
        double put = std::min(caps_out[i], rem);
        inc[i] = put;
        rem -= put;
        if (rem <= 0.0) break;
    }
    return assemble_shell(grid, base, delta, inside, dec, outside, inc);
}

std::vector<double> default_delta_grid(const GridDomain& grid, double V0, int count) {
    double lo = 2.0 * grid.cell_area();
    double hi = 0.2 * V0;
    if (!(hi > lo)) throw Error("default_delta_grid: resolution too coarse for this mass");
    std::vector<double> d(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        d[static_cast<std::size_t>(i)] =
            lo * std::pow(hi / lo, count == 1 ? 0.0 : static_cast<double>(i) / (count - 1));
    return d;
}

StabilityReport estimate_constant(const GridDomain& grid, const OptimalSetRegistry& reg,
                                  const StabilityOptions& opts) {
    if (reg.entries.empty()) throw EmptyRegistry("estimate_constant");
    StabilityReport rep;
    rep.lambda_bar = reg.lambda_bar;
    rep.seed = opts.seed;
    std::vector<double> deltas =
        opts.deltas.empty() ? default_delta_grid(grid, reg.V0) : opts.deltas;
    std::sort(deltas.begin(), deltas.end());

    const int n_entries = static_cast<int>(reg.entries.size());
    const double shift = reg.dirichlet_lambda - 2.0;

    for (std::size_t di = 0; di < deltas.size(); ++di) {
        double delta = deltas[di];
        std::vector<ShellSample> batch(static_cast<std::size_t>(opts.n_per_delta));
        parallel_for(opts.n_per_delta, opts.workers, [&](int s) {
            Rng rng(opts.seed, "stability/sample",
                    static_cast<std::uint64_t>(di) * 1000003ull + static_cast<std::uint64_t>(s));
            int base = s % n_entries;
            const auto& entry = reg.entries[static_cast<std::size_t>(base)];
            Potential V = sample_shell(grid, reg, base, delta, rng);
            EigenOptions eo;
            eo.tol = opts.eigen_tol;
            eo.shift = shift;
            eo.warm_start = &entry.pair.u;
            EigenPair pair = principal_eigenpair(grid, V.field, eo);
            auto& rec = batch[static_cast<std::size_t>(s)];
            rec.delta = delta;
            rec.sample_id = s;
            rec.base_index = base;
            rec.lambda = pair.lambda;
            rec.gap = pair.lambda - reg.lambda_bar;
            rec.ratio = rec.gap / (delta * delta);
        });

        double raw_min_gap = std::numeric_limits<double>::infinity();
        for (const auto& s : batch) raw_min_gap = std::min(raw_min_gap, s.gap);

        if (opts.local_descent) {
            // the linearized step depends only on (entry, u), not on the random
            // draw, so one descended chain per base entry covers every sample
            for (int base = 0; base < n_entries; ++base) {
                const auto& entry = reg.entries[static_cast<std::size_t>(base)];
                const ScalarField* u_cur = &entry.pair.u;
                EigenPair pair;
                for (int step = 0; step < opts.descent_steps; ++step) {
                    Potential V = shell_linearized_step(grid, entry, delta, *u_cur);
                    int nearest = -1;
                    dist_to_registry(V, reg, &nearest);
                    if (nearest != base) break; // descent left the base shell
                    EigenOptions eo;
                    eo.tol = opts.eigen_tol;
                    eo.shift = shift;
                    eo.warm_start = u_cur;
                    pair = principal_eigenpair(grid, V.field, eo);
                    ShellSample rec;
                    rec.delta = delta;
                    rec.sample_id = opts.n_per_delta + base * opts.descent_steps + step;
                    rec.base_index = base;
                    rec.lambda = pair.lambda;
                    rec.gap = pair.lambda - reg.lambda_bar;
                    rec.ratio = rec.gap / (delta * delta);
                    rec.descended = true;
                    batch.push_back(rec);
                    u_cur = &pair.u;
                }
            }
        }

        PerDeltaStats st;
        st.delta = delta;
        st.n = static_cast<int>(batch.size());
        st.raw_min_gap = raw_min_gap;
        st.min_gap = std::numeric_limits<double>::infinity();
        std::vector<double> ratios;
        ratios.reserve(batch.size());
        for (const auto& s : batch) {
            st.min_gap = std::min(st.min_gap, s.gap);
            ratios.push_back(s.ratio);
        }
        std::sort(ratios.begin(), ratios.end());
        st.min_ratio = ratios.front();
        st.median_ratio = ratios[ratios.size() / 2];
        rep.per_delta.push_back(st);
        rep.samples.insert(rep.samples.end(), batch.begin(), batch.end());
    }

    rep.estimated_C = std::numeric_limits<double>::infinity();
    for (const auto& s : rep.samples) {
        rep.estimated_C = std::min(rep.estimated_C, s.ratio);
        if (s.gap < -2.0 * opts.eigen_tol) rep.invalid_registry = true;
    }

    // log-log fit of the per-delta minimal gap; quadratic stability shows as
    // slope near 2
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (const auto& st : rep.per_delta) {
        if (!(st.min_gap > 0.0)) continue;
        double lx = std::log(st.delta), ly = std::log(st.min_gap);
        sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
        ++n;
    }
    rep.loglog_slope = n >= 2 ? (n * sxy - sx * sy) / (n * sxx - sx * sx) : 0.0;
    return rep;
}

} // namespace potlab
