#include "weakprog/sequences.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "weakprog/error.hpp"

namespace weakprog {

std::vector<double> Observation::global_means() const {
    std::vector<double> out(tau);
    for (std::uint32_t t = 0; t < tau; ++t) {
        const auto r = row(t);
        out[t] = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(P);
    }
    return out;
}

bool Observation::is_identity() const {
    for (std::size_t i = 0; i < permutation.size(); ++i)
        if (permutation[i] != i) return false;
    return true;
}

std::vector<Observation> views_of(std::span<const SequenceObservation> seqs) {
    std::vector<Observation> out;
    out.reserve(seqs.size());
    for (const auto& s : seqs) out.push_back(s.view);
    return out;
}

std::vector<SequenceObservation> build_windows(const Cohort& cohort, std::uint32_t tau, bool require_quality) {
    if (tau < 2) throw ConfigError("build_windows: tau must be >= 2");
    std::vector<SequenceObservation> out;
    for (const auto& eye : cohort.eyes) {
        std::vector<const VisitRecord*> usable;
        for (const auto& v : eye.visits)
            if (!require_quality || v.quality_ok) usable.push_back(&v);
        if (usable.size() < tau) continue;
        const std::uint32_t P = static_cast<std::uint32_t>(usable.front()->profile.size());
        for (std::size_t w = 0; w + tau <= usable.size(); ++w) {
            SequenceObservation s;
            auto& o = s.view;
            o.subject_id = eye.subject_id;
            o.eye_id = eye.eye_id;
            o.window_index = static_cast<std::uint32_t>(w);
            o.tau = tau;
            o.P = P;
            o.x.reserve(static_cast<std::size_t>(tau) * P);
            for (std::uint32_t t = 0; t < tau; ++t) {
                const auto* v = usable[w + t];
                o.x.insert(o.x.end(), v->profile.begin(), v->profile.end());
                o.times.push_back(v->t);
            }
            o.pu_label = eye.group == Group::healthy ? 0 : 1;
            o.noise_label = 1;
            o.permutation.resize(tau);
            std::iota(o.permutation.begin(), o.permutation.end(), 0u);
            s.truth_progressing =
                eye.truth.is_progressing && eye.truth.onset_t && *eye.truth.onset_t < o.times.back();
            out.push_back(std::move(s));
        }
    }
    return out;
}

std::string to_string(Partition p) {
    switch (p) {
    case Partition::train: return "train";
    case Partition::validation: return "validation";
    case Partition::test: return "test";
    }
    return "?";
}

Partition SplitAssignment::of(std::uint32_t subject_id) const {
    auto it = subject_partition.find(subject_id);
    if (it == subject_partition.end()) throw DataError("subject " + std::to_string(subject_id) + " is not in the split");
    return it->second;
}

std::array<std::size_t, 3> SplitAssignment::counts() const {
    std::array<std::size_t, 3> c{0, 0, 0};
    for (const auto& [s, p] : subject_partition) ++c[static_cast<int>(p)];
    return c;
}

std::array<std::size_t, 3> largest_remainder_quotas(std::size_t n, std::array<double, 3> ratios) {
    double sum = 0.0;
    for (double r : ratios) {
        if (!(r > 0.0)) throw ConfigError("subject_split: ratios must be positive");
        sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("subject_split: ratios must sum to 1");
    std::array<std::size_t, 3> q{};
    std::array<double, 3> frac{};
    std::size_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
        const double exact = ratios[i] * static_cast<double>(n);
        q[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        frac[i] = exact - static_cast<double>(q[i]);
        assigned += q[i];
    }
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac[a] > frac[b]; });
    for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++q[order[i % 3]];
    return q;
}

SplitAssignment subject_split(std::span<const SequenceObservation> observations, std::array<double, 3> ratios,
                              std::uint64_t seed) {

    std::set<std::uint32_t> unique;
    for (const auto& o : observations) unique.insert(o.view.subject_id);
    if (unique.size() < 3) throw DataError("subject_split: fewer subjects than partitions");

    std::vector<std::uint32_t> subjects(unique.begin(), unique.end());
    Rng rng(derive_seed(seed, 0x5b117));
    rng.shuffle(subjects);

    const auto quotas = largest_remainder_quotas(subjects.size(), ratios);
    SplitAssignment split;
    split.ratios = ratios;
    split.seed = seed;
    std::size_t i = 0;
    for (int part = 0; part < 3; ++part)
        for (std::size_t n = 0; n < quotas[part]; ++n, ++i)
            split.subject_partition[subjects[i]] = static_cast<Partition>(part);
    return split;
}

std::vector<std::uint32_t> random_nonidentity_permutation(std::uint32_t tau, Rng& rng) {
    if (tau < 2) throw ConfigError("scramble: tau must be >= 2");
    std::vector<std::uint32_t> perm(tau);
    while (true) {
        std::iota(perm.begin(), perm.end(), 0u);
        rng.shuffle(perm);
        for (std::uint32_t i = 0; i < tau; ++i)
            if (perm[i] != i) return perm;
    }
}

Observation apply_permutation(const Observation& obs, const std::vector<std::uint32_t>& perm) {
    Observation out = obs;
    for (std::uint32_t i = 0; i < obs.tau; ++i) {
        const auto src = obs.row(perm[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
        out.permutation[i] = obs.permutation[perm[i]];
    }
    return out;
}

Observation scramble(const Observation& obs, Rng& rng) {
    if (obs.tau < 2) throw ConfigError("scramble: tau must be >= 2");
    Observation out = apply_permutation(obs, random_nonidentity_permutation(obs.tau, rng));
    out.noise_label = 0;
    return out;
}

namespace {

double factorial_minus_one(std::uint32_t tau) {
    // tau! - 1, saturating; only compared against small k.
    double f = 1.0;
    for (std::uint32_t i = 2; i <= tau; ++i) f *= i;
    return f - 1.0;
}

}  // namespace

std::vector<Observation> make_noise_dataset(std::span<const Observation> originals, std::uint32_t k, Rng& rng) {
    if (k < 1) throw ConfigError("make_noise_dataset: k must be >= 1");
    const std::uint64_t base = rng.engine()();
    std::vector<Observation> out;
    out.reserve(originals.size() * (1 + k));
    for (std::size_t i = 0; i < originals.size(); ++i) {
        const auto& o = originals[i];
        Rng local(derive_seed(base, i));
        Observation pos = o;
        pos.noise_label = 1;
        out.push_back(pos);
        const bool distinct = factorial_minus_one(o.tau) >= static_cast<double>(k);
        std::vector<std::vector<std::uint32_t>> used;
        for (std::uint32_t j = 0; j < k; ++j) {
            auto perm = random_nonidentity_permutation(o.tau, local);
            while (distinct && std::find(used.begin(), used.end(), perm) != used.end())
                perm = random_nonidentity_permutation(o.tau, local);
            used.push_back(perm);
            Observation neg = apply_permutation(o, perm);
            neg.noise_label = 0;
            out.push_back(std::move(neg));
        }
    }
    return out;
}

std::vector<Observation> selective_shuffle(std::span<const Observation> labeled, double p, Rng& rng) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("selective_shuffle: p must lie in [0,1]");
    const std::uint64_t base = rng.engine()();
    std::vector<Observation> out;
    out.reserve(labeled.size());
    for (std::size_t i = 0; i < labeled.size(); ++i) {
        const auto& o = labeled[i];
        if (!o.external_label)
            throw DataError("selective_shuffle: observation " + std::to_string(o.subject_id) + "/" +
                            std::to_string(o.eye_id) + "/" + std::to_string(o.window_index) + " has no external label");
        Rng local(derive_seed(base, i));
        const double u = local.uniform();
        const bool shuffle = (*o.external_label == 1 && u < p) || (*o.external_label == 0 && u < 1.0 - p);
        if (shuffle) {
            Observation s = scramble(o, local);
            s.external_label = 0;
            s.noise_label = 0;
            out.push_back(std::move(s));
        } else {
            out.push_back(o);
        }
    }
    return out;
}

Observation augment(const Observation& obs, const AugmentConfig& cfg, Rng& rng) {
    if (cfg.jitter_sd < 0 || cfg.scale < 0 || cfg.dropout_frac < 0 || cfg.dropout_prob < 0 || cfg.scale >= 1.0)
        throw ConfigError("augment: magnitudes must be >= 0 (and scale < 1)");
    Observation out = obs;
    const std::uint32_t P = obs.P;
    if (cfg.jitter_sd > 0.0)
        for (double& v : out.x) v += rng.normal(0.0, cfg.jitter_sd);
    if (cfg.scale > 0.0) {
        const double factor = std::exp(rng.uniform(std::log1p(-cfg.scale), std::log1p(cfg.scale)));
        for (double& v : out.x) v *= factor;
    }
    if (cfg.max_shift > 0) {
        const auto shift = rng.uniform_int(-static_cast<std::int64_t>(cfg.max_shift), cfg.max_shift);
        if (shift != 0) {
            const std::size_t s = static_cast<std::size_t>((shift % P + P) % P);
            for (std::uint32_t t = 0; t < out.tau; ++t) {
                auto r = out.row(t);
                std::rotate(r.begin(), r.begin() + (P - s) % P, r.end());
            }
        }
    }
    const auto max_len = static_cast<std::int64_t>(std::floor(cfg.dropout_frac * P));
    if (cfg.dropout_prob > 0.0 && max_len >= 1) {
        for (std::uint32_t t = 0; t < out.tau; ++t) {
            if (!rng.bernoulli(cfg.dropout_prob)) continue;
            const auto len = rng.uniform_int(1, max_len);
            const auto start = rng.uniform_int(0, P - 1);
            auto r = out.row(t);
            for (std::int64_t j = 0; j < len; ++j) r[static_cast<std::size_t>((start + j) % P)] = 0.0;
        }
    }
    return out;
}

}  // namespace weakprog
