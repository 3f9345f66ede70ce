// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#include "declab/attack/attack.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>

#include "declab/common/error.hpp"
#include "declab/decoder/search.hpp"
#include "declab/stats/stats.hpp"

namespace declab::attack {

void AttackSettings::validate() const {
    require(!prompts.empty(), ErrorKind::InvalidInput, "attack needs at least one prompt");
    for (const auto& p : prompts) require(!p.empty(), ErrorKind::InvalidInput, "empty prompt");
    require(stage1_repeats >= 2, ErrorKind::InvalidInput, "stage1_repeats must be at least 2");
    require(stage1_length >= 1 && stage2_steps >= 1 && stage2_prompts >= 1 && stage3_prompts >= 1 &&
                stage4_prompts >= 1 && stage6_prompts >= 1,
            ErrorKind::InvalidInput, "stage counts must be at least 1");
    require(stage3_queries >= 1 && stage4_queries >= 1 && stage5_queries >= 1 && stage6_queries >= 1, ErrorKind::InvalidInput,
            "query budgets must be at least 1");
    for (double band : {temperature_unity_band, ratio_unity_band, stage6_match_tolerance}) {
        require(band > 0.0 && band < 0.5, ErrorKind::InvalidInput, "bands must lie in (0, 0.5)");
    }
    require(stage6_gain_per_draw >= 0.0, ErrorKind::InvalidInput, "stage6_gain_per_draw must be non-negative");
}

decoding::DecodingConfig AttackReport::inferred_config() const {
    switch (detected) {
    case DetectedKind::Greedy: return decoding::DecodingConfig::greedy();
    case DetectedKind::Beam: return decoding::DecodingConfig::beam(beam_size.value_or(2));
    case DetectedKind::Sampler: break;
    }
    decoding::SamplerParams p;
    p.temperature = temperature;
    if (top_k) p.top_k = static_cast<int>(*top_k);
    p.top_p = top_p;
    return decoding::DecodingConfig::sampling(p);
}

std::string AttackReport::kind_name() const {
    switch (detected) {
    case DetectedKind::Greedy: return "greedy";
    case DetectedKind::Beam: return "beam";
    case DetectedKind::Sampler: break;
    }
    return sampler_case == 0 ? "sampler" : "sampler-case-" + std::to_string(sampler_case);
}

bool stage1_is_sampling(victim::GenerationApi& api, const Tokens& prompt, int repeats, int length) {
    require(repeats >= 2, ErrorKind::InvalidInput, "need at least two repeats");
    const victim::GenerationRequest request{prompt, length, false};
    // Every repeat is sent even after a mismatch so the stage costs a fixed budget.
    const Tokens first = api.generate(request).tokens;
    bool differs = false;
    for (int i = 1; i < repeats; ++i) differs = api.generate(request).tokens != first || differs;
    return differs;
}

Stage2Result stage2_classify_deterministic(victim::GenerationApi& api, const std::vector<Tokens>& prompts,
                                           int steps) {
    require(steps >= 2, ErrorKind::InvalidInput, "need at least two steps to compare prefixes");
    Stage2Result result;
    for (const auto& prompt : prompts) {
        auto& outputs = result.outputs.emplace_back();
        for (int t = 1; t <= steps; ++t) {
            outputs.push_back(api.generate({prompt, t, true}));
            const auto& longer = outputs.back().tokens;
            if (t > 1) {
                const auto& shorter = outputs[outputs.size() - 2].tokens;
                if (!std::equal(shorter.begin(), shorter.end(), longer.begin())) {
                    result.algorithm = decoding::Algorithm::Beam;
                }
            }
        }
    }
    return result;
}

int estimate_beam_size(const std::vector<Tokens>& prompts, const Stage2Result& stage2, InnerProbSource& inner) {
    std::vector<std::size_t> ranks;
    for (std::size_t i = 0; i < stage2.outputs.size() && i < prompts.size(); ++i) {
        for (const auto& response : stage2.outputs[i]) {
            inner.absorb(prompts[i], response);
            Tokens context = prompts[i];
            for (TokenId t : response.tokens) {
                const auto view = inner.inner(context);
                // A token outside the exposed slice ranks at least one past it.
                ranks.push_back(view.rank_of(t).value_or(view.entries.size() + 1));
                context.push_back(t);
            }
        }
    }
    return beam_size_from_ranks(ranks);
}

int estimate_beam_size(victim::GenerationApi& api, const std::vector<Tokens>& prompts, int steps,
                       InnerProbSource& inner) {
    return estimate_beam_size(prompts, stage2_classify_deterministic(api, prompts, steps), inner);
}

std::optional<int> fit_beam_size(const std::vector<Tokens>& prompts, const Stage2Result& stage2,
                                 InnerProbSource& inner, int lower, int upper) {
    require(lower >= 1 && upper >= lower, ErrorKind::InvalidInput, "bad beam size range");
    std::map<Tokens, std::shared_ptr<const RankedDistribution>> cache;
    std::size_t shortest = SIZE_MAX;
    const decoding::InnerFn replay = [&](const Tokens& context) {
        auto& slot = cache[context];
        if (!slot) {
            const auto view = inner.inner(context);
            if (!view.complete) shortest = std::min(shortest, view.entries.size());
            slot = std::make_shared<const RankedDistribution>(view.distribution());
        }
        return slot;
    };
    for (int size = lower; size <= upper; ++size) {
        bool fits = true;
        for (std::size_t i = 0; fits && i < stage2.outputs.size() && i < prompts.size(); ++i) {
            for (const auto& response : stage2.outputs[i]) {
                const int length = static_cast<int>(response.tokens.size());
                if (length == 0) continue;
                if (decoding::beam_decode(replay, prompts[i], size, length) != response.tokens) {
                    fits = false;
                    break;
                }
            }
        }
        // A truncated slice hides candidates the real search would score.
        if (shortest < static_cast<std::size_t>(size)) return std::nullopt;
        if (fits) return size;
    }
    return std::nullopt;
}

Stage4Result stage4_detect_top_k(FinalObserver& observer, const std::vector<Tokens>& prompts, std::uint64_t draws) {
    Stage4Result result;
    for (const auto& prompt : prompts) result.unique_counts.push_back(observer.observe(prompt, draws).dist.size());
    result.top_k = top_k_from_unique_counts(result.unique_counts);
    return result;
}

std::optional<JointEstimate> stage6_joint_k_p(FinalObserver& observer, const std::pair<Tokens, Tokens>& prompts,
                                              const std::pair<RankedDistribution, RankedDistribution>& inner_detempered,
                                              std::size_t vocab_size, std::uint64_t draws) {
    const auto p_obs = observer.observe(prompts.first, draws);
    const auto q_obs = observer.observe(prompts.second, draws);
    require(stats::total_variation(inner_detempered.first, inner_detempered.second) > 1e-6,
            ErrorKind::NeedsNewPrompts, "the two prompts have near-identical inner distributions");
    const std::vector<SupportEvidence> evidence{{inner_detempered.first, p_obs.dist.size()},
                                                {inner_detempered.second, q_obs.dist.size()}};
    return consistent_top_k(evidence, vocab_size, p_obs.exact() && q_obs.exact() ? 1e-12 : 0.0);
}

namespace {

// How far above the rank bound the beam size replay looks.
constexpr int kBeamSearchSlack = 8;

victim::Usage minus(const victim::Usage& a, const victim::Usage& b) {
    return {a.queries - b.queries, a.tokens - b.tokens};
}

class Attack {
public:
    Attack(victim::GenerationApi& api, const AttackSettings& settings, InnerProbSource* inner,
           FinalObserver* observer)
        : api_(api), settings_(settings), inner_(inner), sampling_(api),
          observer_(observer ? *observer : sampling_) {}

    AttackReport run();

private:
    StageDiagnostic& begin(const std::string& name) {
        StageDiagnostic d;
        d.stage = name;
        report_.stages.push_back(std::move(d));
        stage_start_ = api_.usage();
        return report_.stages.back();
    }
    void end() { report_.stages.back().spent = minus(api_.usage(), stage_start_); }

    bool confirm_top_k_last(std::size_t k, std::size_t skip, double tau, StageDiagnostic& diag);
    void run_deterministic();
    void run_sampler();
    void run_stage6();
    // Records an estimate, treating one inside the unity band as no temperature.
    void set_temperature(double tau) {
        if (std::abs(tau - 1.0) > settings_.temperature_unity_band) {
            report_.temperature = tau;
        } else {
            report_.temperature.reset();
        }
    }
    double temperature() const { return report_.temperature.value_or(1.0); }
    void order_prompts();
    std::vector<Tokens> first(int n) const;
    RankedDistribution detempered(const Tokens& prompt, double tau);

    victim::GenerationApi& api_;
    const AttackSettings& settings_;
    InnerProbSource* inner_;
    SamplingObserver sampling_;
    FinalObserver& observer_;
    AttackReport report_;
    victim::Usage stage_start_;
    std::vector<Tokens> ordered_;
    std::size_t vocab_ = 0;
};

std::vector<Tokens> Attack::first(int n) const {
    const auto count = std::min<std::size_t>(static_cast<std::size_t>(n), ordered_.size());
    return {ordered_.begin(), ordered_.begin() + static_cast<std::ptrdiff_t>(count)};
}

RankedDistribution Attack::detempered(const Tokens& prompt, double tau) {
    const auto view = inner_->inner(prompt);
    require(view.complete || tau == 1.0, ErrorKind::Unsupported,
            "detempering needs the complete inner distribution");
    return detemper(view.distribution(), tau);
}

AttackReport Attack::run() {
    settings_.validate();
    const auto start = api_.usage();
    report_.degraded = inner_ == nullptr;
    vocab_ = settings_.vocab_size;
    ordered_ = settings_.prompts;

    auto& s1 = begin("stage1");
    const bool sampling = stage1_is_sampling(api_, ordered_.front(), settings_.stage1_repeats, settings_.stage1_length);
    s1.values["sampling"] = sampling ? 1.0 : 0.0;
    end();

    if (sampling) {
        run_sampler();
    } else {
        run_deterministic();
    }
    report_.ledger = minus(api_.usage(), start);
    return std::move(report_);
}

// Equal distinct-token counts on a few similar prompts can also come from a
// nucleus cut that happens to land on the same rank. The verdict stands only
// if every further pool prompt whose k-th token should be seen at least
// kMinExpected times shows exactly k tokens.
bool Attack::confirm_top_k_last(std::size_t k, std::size_t skip, double tau, StageDiagnostic& diag) {
    constexpr double kMinExpected = 20.0;
    const auto prompts = first(settings_.stage6_prompts);
    const double draws = static_cast<double>(settings_.stage6_queries);
    std::size_t checked = 0;
    for (std::size_t i = skip; i < prompts.size(); ++i) {
        const auto inner_det = detempered(prompts[i], tau);
        if (inner_det.size() < k) continue;
        const double expected = draws * inner_det[k - 1].prob / inner_det.prefix_mass(k);
        if (expected < kMinExpected) continue;
        ++checked;
        const auto support = observer_.observe(prompts[i], settings_.stage6_queries).dist.size();
        if (support != k) {
            diag.values["contradicted_by_support"] = static_cast<double>(support);
            diag.values["confirmations"] = static_cast<double>(checked);
            return false;
        }
    }
    diag.values["confirmations"] = static_cast<double>(checked);
    return true;
}

void Attack::run_deterministic() {
    auto& s2 = begin("stage2");
    const auto prompts = first(settings_.stage2_prompts);
    const auto result = stage2_classify_deterministic(api_, prompts, settings_.stage2_steps);
    const bool beam = result.algorithm == decoding::Algorithm::Beam;
    report_.detected = beam ? DetectedKind::Beam : DetectedKind::Greedy;
    s2.values["beam"] = beam ? 1.0 : 0.0;
    if (beam && !inner_) s2.message = "beam size needs inner probabilities";
    if (beam && inner_) s2.values["beam_size"] = estimate_beam_size(prompts, result, *inner_);
    end();
    if (!beam || !inner_) return;
    report_.beam_size = static_cast<int>(report_.stages.back().values["beam_size"]);

    // Emitted ranks only bound the size from below: the deepest rank is rarely
    // the one that wins. Replaying the search settles the exact size.
    auto& sb = begin("beam_size");
    const int lower = *report_.beam_size;
    sb.values["rank_bound"] = lower;
    if (const auto fitted = fit_beam_size(prompts, result, *inner_, lower, lower + kBeamSearchSlack)) {
        report_.beam_size = *fitted;
    } else {
        sb.message = "no beam size reproduces the outputs; keeping the rank bound";
    }
    sb.values["beam_size"] = *report_.beam_size;
    end();
}

// Flattest prompts first. Rank kurtosis is reported for each prompt, but the
// ordering uses entropy: kurtosis is minimised by near two-point distributions,
// which are exactly the prompts that hide the tail.
void Attack::order_prompts() {
    auto& sel = begin("prompt_selection");
    if (!settings_.select_flat_prompts) {
        sel.status = "skipped";
        end();
        return;
    }
    struct Scored {
        double entropy;
        double kurtosis;
        std::size_t index;
    };
    std::vector<Scored> scored;
    for (std::size_t i = 0; i < ordered_.size(); ++i) {
        const auto view = inner_->inner(ordered_[i]);
        if (view.complete && vocab_ == 0) vocab_ = view.entries.size();
        const auto dist = view.distribution();
        const double kurt = dist.size() >= 2 ? stats::kurtosis(dist) : INFINITY;
        scored.push_back({stats::entropy(dist), kurt, i});
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const Scored& a, const Scored& b) { return a.entropy > b.entropy; });
    std::vector<Tokens> sorted;
    for (const auto& s : scored) {
        sorted.push_back(ordered_[s.index]);
        sel.series["entropy"].push_back(s.entropy);
        sel.series["kurtosis"].push_back(s.kurtosis);
    }
    ordered_ = std::move(sorted);
    end();
}

void Attack::run_sampler() {
    report_.detected = DetectedKind::Sampler;

    if (!inner_) {
        auto& s4 = begin("stage4");
        const auto result = stage4_detect_top_k(observer_, first(settings_.stage4_prompts), settings_.stage4_queries);
        for (auto c : result.unique_counts) s4.series["unique_tokens"].push_back(static_cast<double>(c));
        if (result.top_k && (vocab_ == 0 || *result.top_k < vocab_)) {
            report_.top_k = result.top_k;
            s4.values["top_k"] = static_cast<double>(*result.top_k);
        }
        end();
        for (const char* name : {"stage3", "stage5", "stage6"}) {
            auto& d = begin(name);
            d.status = "unavailable";
            d.message = "needs inner probabilities";
            end();
        }
        return;
    }

    order_prompts();

    // Stage 3: temperature.
    double tau = 1.0;
    {
        auto& s3 = begin("stage3");
        try {
            std::vector<InnerView> views;
            std::vector<FinalObservation> finals;
            for (const auto& prompt : first(settings_.stage3_prompts)) {
                views.push_back(inner_->inner(prompt));
                finals.push_back(observer_.observe(prompt, settings_.stage3_queries));
                try {
                    s3.series["pairwise"].push_back(temperature_from_top_pairs(views.back(), finals.back()));
                } catch (const Error&) {
                }
            }
            const auto fit = fit_temperature(views, finals);
            s3.values["temperature"] = fit.temperature;
            s3.values["tokens"] = static_cast<double>(fit.tokens);
            tau = fit.temperature;
        } catch (const Error& e) {
            s3.status = "failed";
            s3.message = e.what();
        }
        end();
    }
    set_temperature(tau);

    // Stage 4: top-k as the last transform.
    const auto s4_prompts = first(settings_.stage4_prompts);
    {
        auto& s4 = begin("stage4");
        const auto result = stage4_detect_top_k(observer_, s4_prompts, settings_.stage4_queries);
        for (auto c : result.unique_counts) s4.series["unique_tokens"].push_back(static_cast<double>(c));
        // Stage-3 and stage-4 draws together pin the temperature far better than
        // stage 3 alone, whichever transforms follow it.
        try {
            std::vector<Tokens> prompts = first(std::max(settings_.stage3_prompts, settings_.stage4_prompts));
            std::vector<InnerView> views;
            std::vector<FinalObservation> finals;
            for (const auto& prompt : prompts) {
                views.push_back(inner_->inner(prompt));
                finals.push_back(observer_.observe(prompt, 1));
            }
            const double refit = fit_temperature(views, finals, true).temperature;
            s4.values["temperature"] = refit;
            set_temperature(refit);
        } catch (const Error& e) {
            s4.message = e.what();
        }
        bool top_k_last = result.top_k && (vocab_ == 0 || *result.top_k < vocab_);
        if (top_k_last) {
            try {
                top_k_last = confirm_top_k_last(*result.top_k, s4_prompts.size(), temperature(), s4);
            } catch (const Error& e) {
                s4.message = e.what();
            }
        }
        end();
        if (top_k_last) {
            report_.top_k = result.top_k;
            report_.sampler_case = report_.temperature ? 5 : 2;
            return;
        }
    }

    // Stage 5: is anything truncated at all?
    {
        auto& s5 = begin("stage5");
        std::vector<NucleusEvidence> evidence;
        try {
            const auto draws = std::max(settings_.stage4_queries, settings_.stage5_queries);
            for (const auto& prompt : s4_prompts) {
                const auto obs = observer_.observe(prompt, draws);
                evidence.push_back(nucleus_evidence(detempered(prompt, temperature()), obs, settings_.stage5_mass_target));
                s5.series["kept_mass"].push_back(evidence.back().kept_mass);
            }
        } catch (const Error& e) {
            s5.status = "failed";
            s5.message = e.what();
        }
        end();
        if (evidence.empty()) {
            report_.sampler_case = report_.temperature ? 1 : 4;
            return;
        }
        double mean = 0.0;
        for (const auto& ev : evidence) mean += ev.kept_mass;
        mean /= static_cast<double>(evidence.size());
        report_.stages.back().values["kept_mass"] = mean;
        if (1.0 - mean <= settings_.ratio_unity_band) {
            report_.sampler_case = report_.temperature ? 1 : 4;
            return;
        }
    }

    run_stage6();
}

namespace {

std::size_t deepest_rank(const RankedDistribution& inner_det, const FinalObservation& obs) {
    std::size_t deepest = 0;
    for (const auto& e : obs.dist) {
        const auto rank = inner_det.rank_of(e.token);
        require(rank.has_value(), ErrorKind::EstimationFailed, "output token missing from inner distribution");
        deepest = std::max(deepest, *rank + 1);
    }
    return deepest;
}

}  // namespace

// Stage 6: nucleus alone, or top-k ahead of it.
void Attack::run_stage6() {
    auto& s6 = begin("stage6");
    double tau = temperature();
    try {
        require(vocab_ > 0, ErrorKind::Unsupported, "stage 6 needs the vocabulary size");
        std::vector<Tokens> prompts;
        std::vector<FinalObservation> finals;
        auto observe_more = [&](std::size_t count) {
            prompts = first(static_cast<int>(count));
            while (finals.size() < prompts.size()) {
                finals.push_back(observer_.observe(prompts[finals.size()], settings_.stage6_queries));
            }
        };
        auto evidence_at = [&](double t) {
            std::vector<SupportEvidence> supports;
            for (std::size_t i = 0; i < finals.size(); ++i) {
                auto inner_det = detempered(prompts[i], t);
                const auto deepest = deepest_rank(inner_det, finals[i]);
                const double draws = finals[i].exact() ? 1.0 : finals[i].draws;
                supports.push_back({std::move(inner_det), deepest, draws});
            }
            return supports;
        };
        const auto batch = static_cast<std::size_t>(std::max(settings_.stage6_prompts, 2));
        observe_more(batch);
        for (const auto& obs : finals) s6.series["support"].push_back(static_cast<double>(obs.dist.size()));
        const bool exact = finals.front().exact();

        std::optional<JointEstimate> joint;
        double nucleus_p = 0.0;
        if (exact) {
            std::vector<NucleusEvidence> ev6;
            auto supports = evidence_at(tau);
            for (std::size_t i = 0; i < finals.size(); ++i) {
                ev6.push_back(nucleus_evidence(supports[i].inner_detempered, finals[i], settings_.stage5_mass_target));
                s6.series["kept_mass"].push_back(ev6.back().kept_mass);
            }
            const auto order = test_top_k_before_nucleus(ev6, 0.0);
            s6.values["spread"] = order.spread;
            s6.values["violation"] = order.violation;
            if (order.top_k_first) {
                joint = consistent_top_k(supports, vocab_, 1e-12);
                // Exact observations are free of noise, so when several cut-offs fit,
                // widen the prompt set until one remains or the pool runs out.
                while (joint && joint->alternatives > 0 && finals.size() < ordered_.size()) {
                    observe_more(finals.size() + batch);
                    supports = evidence_at(tau);
                    joint = consistent_top_k(supports, vocab_, 1e-12);
                }
                if (joint) s6.values["alternatives"] = static_cast<double>(joint->alternatives);
                if (!joint) {
                    s6.status = "failed";
                    s6.message = "no top-k cut is consistent with the observed supports";
                }
            }
            if (!joint) nucleus_p = nucleus_interval(supports).p;
        } else {
            // Every pipeline keeps a prefix of the ranking, so the temperature can be
            // refitted on all stage-6 draws down to the deepest observed rank.
            std::vector<InnerView> views;
            for (const auto& prompt : prompts) views.push_back(inner_->inner(prompt));
            const double refit = fit_temperature(views, finals, true).temperature;
            s6.values["temperature"] = refit;
            set_temperature(refit);
            tau = temperature();
            const auto fit = profile_top_k(evidence_at(tau), vocab_);
            double draws = 0.0;
            for (const auto& obs : finals) draws += obs.draws;
            const double gain = (fit.loss_nucleus_only - fit.loss_top_k) / draws;
            s6.values["loss_top_k"] = fit.loss_top_k;
            s6.values["loss_nucleus_only"] = fit.loss_nucleus_only;
            s6.values["gain_per_draw"] = gain;
            if (fit.top_k && gain > settings_.stage6_gain_per_draw) joint = fit.top_k;
            nucleus_p = fit.nucleus_only.p;
        }
        s6.values["prompts"] = static_cast<double>(finals.size());

        if (joint) {
            report_.top_k = joint->k;
            report_.top_p = joint->p;
            s6.values["p_low"] = joint->p_low;
            s6.values["p_high"] = joint->p_high;
            report_.sampler_case = report_.temperature ? 8 : 7;
        } else if (nucleus_p >= 1.0 - settings_.ratio_unity_band) {
            // Stage 5 saw a deficit, but the supports need no cut at all; the
            // deficit came from temperature error.
            s6.message = "no truncation";
            report_.sampler_case = report_.temperature ? 1 : 4;
        } else {
            report_.top_p = nucleus_p;
            report_.sampler_case = report_.temperature ? 6 : 3;
        }
    } catch (const Error& e) {
        s6.status = "failed";
        s6.message = e.what();
        report_.sampler_case = report_.temperature ? 6 : 3;
    }
    end();
}

}  // namespace

AttackReport run_full_attack(victim::GenerationApi& api, const AttackSettings& settings, InnerProbSource* inner,
                             FinalObserver* observer) {
    return Attack(api, settings, inner, observer).run();
}

}  // namespace declab::attack
