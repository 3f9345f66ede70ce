// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#include "declab/attack/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "declab/common/error.hpp"

namespace declab::attack {

namespace {

std::unordered_map<TokenId, double> prob_map(const RankedDistribution& dist) {
    std::unordered_map<TokenId, double> out;
    out.reserve(dist.size());
    for (const auto& e : dist) out.emplace(e.token, e.prob);
    return out;
}

double lookup(const std::unordered_map<TokenId, double>& m, TokenId t) {
    auto it = m.find(t);
    return it == m.end() ? 0.0 : it->second;
}

// Prefix sums C[0..n] of a ranked distribution; C[j] is the top-j mass.
std::vector<double> prefix_masses(const RankedDistribution& dist) {
    std::vector<double> c(dist.size() + 1, 0.0);
    for (std::size_t r = 0; r < dist.size(); ++r) c[r + 1] = c[r] + dist[r].prob;
    return c;
}

double mass_at(const std::vector<double>& c, std::size_t j) {
    return c[std::min(j, c.size() - 1)];
}

}  // namespace

int beam_size_from_ranks(const std::vector<std::size_t>& ranks) {
    require(!ranks.empty(), ErrorKind::InvalidInput, "no ranks observed");
    return static_cast<int>(*std::max_element(ranks.begin(), ranks.end()));
}

double stage3_estimate_temperature(double inner_i, double inner_j, double final_i, double final_j) {
    require(inner_i > 0 && inner_j > 0 && final_i > 0 && final_j > 0, ErrorKind::InvalidInput,
            "probabilities must be positive");
    const double den = std::log(final_i / final_j);
    require(den != 0.0, ErrorKind::EstimationFailed, "final probabilities of the pair are equal");
    return std::log(inner_i / inner_j) / den;
}

double temperature_from_top_pairs(const InnerView& inner, const FinalObservation& final_obs) {
    const auto final_of = prob_map(final_obs.dist);
    static constexpr std::pair<std::size_t, std::size_t> kPairs[] = {{0, 1}, {0, 2}, {1, 2}};
    double sum = 0.0;
    int used = 0;
    for (const auto& [i, j] : kPairs) {
        if (j >= inner.entries.size()) continue;
        const auto& a = inner.entries[i];
        const auto& b = inner.entries[j];
        const double fa = lookup(final_of, a.token);
        const double fb = lookup(final_of, b.token);
        if (fa <= 0.0 || fb <= 0.0 || fa == fb || a.prob == b.prob) continue;
        sum += stage3_estimate_temperature(a.prob, b.prob, fa, fb);
        ++used;
    }
    require(used > 0, ErrorKind::EstimationFailed, "no usable token pair");
    return sum / used;
}

TemperatureFit fit_temperature(const std::vector<InnerView>& inner, const std::vector<FinalObservation>& finals,
                               bool through_deepest) {
    require(inner.size() == finals.size() && !inner.empty(), ErrorKind::InvalidInput,
            "need matching inner and final observations");
    struct Run {
        std::vector<double> log_inner;
        std::vector<double> weight;
        double total = 0.0;
        double weighted_log = 0.0;
    };
    std::vector<Run> runs;
    std::size_t tokens = 0;
    for (std::size_t i = 0; i < inner.size(); ++i) {
        const auto final_of = prob_map(finals[i].dist);
        const double scale = finals[i].exact() ? 1.0 : finals[i].draws;
        std::size_t window = inner[i].entries.size();
        if (through_deepest) {
            while (window > 0 && lookup(final_of, inner[i].entries[window - 1].token) <= 0.0) --window;
        }
        Run run;
        for (std::size_t r = 0; r < window; ++r) {
            const auto& e = inner[i].entries[r];
            const double q = lookup(final_of, e.token);
            if (q <= 0.0 && !through_deepest) break;
            run.log_inner.push_back(std::log(e.prob));
            run.weight.push_back(q * scale);
            run.total += q * scale;
            run.weighted_log += q * scale * std::log(e.prob);
        }
        if (run.log_inner.size() < 2) continue;
        tokens += run.log_inner.size();
        runs.push_back(std::move(run));
    }
    require(!runs.empty(), ErrorKind::EstimationFailed, "no prompt shows two leading tokens");

    // Newton's method on the concave log-likelihood in beta = 1/tau.
    double beta = 1.0;
    for (int iter = 0; iter < 200; ++iter) {
        double grad = 0.0, curv = 0.0;
        for (const auto& run : runs) {
            const double top = *std::max_element(run.log_inner.begin(), run.log_inner.end());
            double z = 0.0, m1 = 0.0, m2 = 0.0;
            for (double l : run.log_inner) {
                const double w = std::exp(beta * (l - top));
                z += w;
                m1 += w * l;
                m2 += w * l * l;
            }
            const double mean = m1 / z;
            const double var = std::max(m2 / z - mean * mean, 0.0);
            grad += run.weighted_log - run.total * mean;
            curv += run.total * var;
        }
        require(curv > 0.0, ErrorKind::EstimationFailed, "inner probabilities carry no spread");
        double next = beta + grad / curv;
        if (!(next > 0.0)) next = beta / 2.0;
        const bool done = std::abs(next - beta) <= 1e-14 * std::max(1.0, beta);
        beta = next;
        if (done) break;
    }
    return {1.0 / beta, tokens};
}

RankedDistribution detemper(const RankedDistribution& inner, double tau) {
    require(std::isfinite(tau) && tau > 0.0, ErrorKind::InvalidInput, "temperature must be positive");
    if (tau == 1.0) return inner;
    const double top = std::log(inner[0].prob);
    std::vector<TokenProb> weights;
    weights.reserve(inner.size());
    for (const auto& e : inner) weights.push_back({e.token, std::exp((std::log(e.prob) - top) / tau)});
    return RankedDistribution::normalize(std::move(weights));
}

std::optional<std::size_t> top_k_from_unique_counts(const std::vector<std::size_t>& unique_counts) {
    require(!unique_counts.empty(), ErrorKind::InvalidInput, "no prompts observed");
    const std::size_t first = unique_counts.front();
    for (std::size_t c : unique_counts) {
        if (c != first) return std::nullopt;
    }
    return first;
}

double stage5_estimate_p_ratio(const RankedDistribution& inner_detempered, const FinalObservation& final_obs,
                               std::size_t tokens) {
    require(final_obs.dist.size() > 0 && tokens >= 1, ErrorKind::InvalidInput, "empty final observation");
    const auto final_of = prob_map(final_obs.dist);
    double inner_mass = 0.0, final_mass = 0.0;
    for (std::size_t r = 0; r < tokens && r < inner_detempered.size(); ++r) {
        const double q = lookup(final_of, inner_detempered[r].token);
        if (q <= 0.0) break;
        inner_mass += inner_detempered[r].prob;
        final_mass += q;
    }
    require(final_mass > 0.0, ErrorKind::EstimationFailed, "top inner token never observed");
    return inner_mass / final_mass;
}

double stage5_estimate_p_sum(const RankedDistribution& inner_detempered, const std::vector<TokenId>& support) {
    const auto inner_of = prob_map(inner_detempered);
    double total = 0.0;
    for (TokenId t : support) total += lookup(inner_of, t);
    return total;
}

NucleusEvidence nucleus_evidence(const RankedDistribution& inner_detempered, const FinalObservation& final_obs,
                                 double mass_target) {
    const auto final_of = prob_map(final_obs.dist);
    NucleusEvidence ev;
    ev.support = final_obs.dist.size();
    double inner_mass = 0.0, final_mass = 0.0;
    bool ratio_done = false;
    for (std::size_t r = 0; r < inner_detempered.size(); ++r) {
        const double q = lookup(final_of, inner_detempered[r].token);
        if (q <= 0.0) break;
        ev.overshoot = inner_detempered[r].prob;
        if (!ratio_done) {
            inner_mass += inner_detempered[r].prob;
            final_mass += q;
            ++ev.tokens_used;
            ratio_done = ev.tokens_used >= 3 && inner_mass >= mass_target;
        }
    }
    require(final_mass > 0.0, ErrorKind::EstimationFailed, "top inner token never observed");
    ev.kept_mass = inner_mass / final_mass;
    if (!final_obs.exact() && final_mass < 1.0) {
        ev.noise = ev.kept_mass * std::sqrt((1.0 - final_mass) / (final_obs.draws * final_mass));
    }
    return ev;
}

OrderTest test_top_k_before_nucleus(const std::vector<NucleusEvidence>& evidence, double z) {
    require(evidence.size() >= 2, ErrorKind::NeedsNewPrompts, "need at least two prompts");
    OrderTest out;
    std::size_t hi = 0, lo = 0;
    double max_kept = -INFINITY, min_kept = INFINITY, max_floor = -INFINITY;
    for (std::size_t i = 0; i < evidence.size(); ++i) {
        const auto& ev = evidence[i];
        max_kept = std::max(max_kept, ev.kept_mass);
        if (ev.kept_mass < min_kept) {
            min_kept = ev.kept_mass;
            lo = i;
        }
        if (ev.kept_mass - ev.overshoot > max_floor) {
            max_floor = ev.kept_mass - ev.overshoot;
            hi = i;
        }
    }
    out.spread = max_kept - min_kept;
    out.violation = max_floor - min_kept;
    out.tolerance = z * std::hypot(evidence[hi].noise, evidence[lo].noise) + 1e-12;
    out.top_k_first = out.violation > out.tolerance;
    return out;
}

std::optional<JointEstimate> consistent_top_k(const std::vector<SupportEvidence>& evidence,
                                              std::size_t vocab_size, double slack) {
    require(!evidence.empty(), ErrorKind::InvalidInput, "no prompts");
    std::vector<std::vector<double>> mass;
    std::size_t k_min = 1;
    for (const auto& ev : evidence) {
        require(ev.support >= 1, ErrorKind::InvalidInput, "empty support");
        mass.push_back(prefix_masses(ev.inner_detempered));
        k_min = std::max(k_min, ev.support);
    }
    // Every consistent k explains the observations exactly; with a flat prior on p the
    // posterior weight of k is the width of its feasible p interval, so take the widest.
    std::optional<JointEstimate> best;
    double best_width = -INFINITY;
    for (std::size_t k = k_min; k < vocab_size; ++k) {
        bool binds = false;
        double low = 0.0, high = INFINITY;
        for (std::size_t i = 0; i < evidence.size(); ++i) {
            const std::size_t s = evidence[i].support;
            const double ck = mass_at(mass[i], k);
            binds = binds || s < k;
            low = std::max(low, mass_at(mass[i], s - 1) / ck);
            high = std::min(high, mass_at(mass[i], s) / ck);
        }
        if (!binds || low >= high + slack) continue;
        if (best) ++best->alternatives;
        if (high - low > best_width) {
            best_width = high - low;
            const std::size_t alternatives = best ? best->alternatives : 0;
            best = JointEstimate{k, std::clamp(0.5 * (low + high), 0.0, 1.0), low, high, alternatives};
        }
    }
    return best;
}

namespace {

struct ProfilePoint {
    double loss = 0.0;
    JointEstimate estimate;
};

ProfilePoint profile_at(const std::vector<SupportEvidence>& evidence, const std::vector<std::vector<double>>& mass,
                        std::size_t k) {
    double low = 0.0;
    for (std::size_t i = 0; i < evidence.size(); ++i) {
        low = std::max(low, mass_at(mass[i], evidence[i].support - 1) / mass_at(mass[i], k));
    }
    ProfilePoint point;
    double high = INFINITY;
    for (std::size_t i = 0; i < evidence.size(); ++i) {
        const double ck = mass_at(mass[i], k);
        std::size_t s = evidence[i].support;
        while (s < k && mass_at(mass[i], s) / ck <= low * (1.0 + 1e-12)) ++s;
        point.loss += evidence[i].draws * std::log(mass_at(mass[i], s) / mass_at(mass[i], evidence[i].support));
        if (s < k) high = std::min(high, mass_at(mass[i], s) / ck);
    }
    high = std::min(high, 1.0);
    point.estimate = JointEstimate{k, 0.5 * (low + high), low, high, 0};
    return point;
}

}  // namespace

ProfileFit profile_top_k(const std::vector<SupportEvidence>& evidence, std::size_t vocab_size) {
    require(!evidence.empty(), ErrorKind::InvalidInput, "no prompts");
    std::vector<std::vector<double>> mass;
    std::size_t k_min = 1;
    for (const auto& ev : evidence) {
        require(ev.support >= 1, ErrorKind::InvalidInput, "empty support");
        require(ev.draws > 0.0, ErrorKind::InvalidInput, "draws must be positive");
        mass.push_back(prefix_masses(ev.inner_detempered));
        k_min = std::max(k_min, ev.support);
    }
    ProfileFit fit;
    const auto nucleus = profile_at(evidence, mass, vocab_size);
    fit.loss_nucleus_only = nucleus.loss;
    fit.nucleus_only = nucleus.estimate;
    fit.nucleus_only.k = 0;
    for (std::size_t k = k_min; k < vocab_size; ++k) {
        const auto point = profile_at(evidence, mass, k);
        if (point.loss < fit.loss_top_k) {
            fit.loss_top_k = point.loss;
            fit.top_k = point.estimate;
        }
    }
    return fit;
}

JointEstimate nucleus_interval(const std::vector<SupportEvidence>& evidence) {
    require(!evidence.empty(), ErrorKind::InvalidInput, "no prompts");
    double low = 0.0, high = 1.0;
    for (const auto& ev : evidence) {
        const auto c = prefix_masses(ev.inner_detempered);
        low = std::max(low, mass_at(c, ev.support - 1));
        high = std::min(high, mass_at(c, ev.support));
    }
    return {0, 0.5 * (low + high), low, high};
}

double expected_queries_for_rarest(double p_min) {
    require(p_min > 0.0 && p_min <= 1.0, ErrorKind::InvalidInput, "p_min must lie in (0, 1]");
    return 1.0 / p_min;
}

}  // namespace declab::attack
