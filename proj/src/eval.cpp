#include "weakprog/eval.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "weakprog/error.hpp"
#include "weakprog/stats.hpp"
#include "weakprog/textio.hpp"

namespace weakprog {

namespace {

std::vector<double> sorted_copy(std::span<const double> v) {
    std::vector<double> s(v.begin(), v.end());
    std::sort(s.begin(), s.end());
    return s;
}

/// (#values < x) + (#values == x) / 2 over a sorted vector.
double rank_count(const std::vector<double>& sorted, double x) {
    const auto lo = std::lower_bound(sorted.begin(), sorted.end(), x);
    const auto hi = std::upper_bound(lo, sorted.end(), x);
    return static_cast<double>(lo - sorted.begin()) + 0.5 * static_cast<double>(hi - lo);
}

void check_scores(std::span<const double> v, const char* who) {
    for (double x : v)
        if (std::isnan(x)) throw DataError(std::string(who) + ": NaN score");
}

double z_for(double level) {
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0,1)");
    return stats::normal_quantile(1.0 - (1.0 - level) / 2.0);
}

std::string num(double v, int decimals = 3) {
    if (!std::isfinite(v)) return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
    return format_fixed(v, decimals);
}

nlohmann::ordered_json json_number(double v) {
    if (std::isfinite(v)) return v;
    return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
}

}  // namespace

double auc(std::span<const double> pos, std::span<const double> neg) {
    if (pos.empty() || neg.empty()) throw DataError("auc: both groups must be nonempty");
    check_scores(pos, "auc");
    check_scores(neg, "auc");
    const auto sn = sorted_copy(neg);
    double sum = 0.0;
    for (double p : pos) sum += rank_count(sn, p);
    return sum / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

double delong_variance(std::span<const double> pos, std::span<const double> neg) {
    if (pos.size() < 2 || neg.size() < 2) throw DataError("delong: need at least 2 scores in each group");
    const auto sn = sorted_copy(neg);
    const auto sp = sorted_copy(pos);
    const double m = static_cast<double>(pos.size()), n = static_cast<double>(neg.size());
    std::vector<double> v10, v01;
    for (double p : pos) v10.push_back(rank_count(sn, p) / n);
    // For a negative x: (#pos > x) + (#pos == x)/2 = m - rank_count(pos, x).
    for (double x : neg) v01.push_back((m - rank_count(sp, x)) / m);
    return stats::sample_variance(v10) / m + stats::sample_variance(v01) / n;
}

AucCi delong_ci(std::span<const double> pos, std::span<const double> neg, double level) {
    AucCi r;
    r.level = level;
    r.auc = auc(pos, neg);
    r.variance = delong_variance(pos, neg);
    const double half = z_for(level) * std::sqrt(std::max(0.0, r.variance));
    r.lo = std::clamp(r.auc - half, 0.0, 1.0);
    r.hi = std::clamp(r.auc + half, 0.0, 1.0);
    r.degenerate = !(r.variance > 0.0);
    return r;
}

double specificity_at(std::span<const double> neg, double threshold) {
    if (neg.empty()) throw DataError("specificity_at: no negatives");
    std::size_t below = 0;
    for (double x : neg)
        if (x < threshold) ++below;
    return static_cast<double>(below) / static_cast<double>(neg.size());
}

double threshold_for_specificity(std::span<const double> neg, double target) {
    if (neg.empty()) throw DataError("threshold_for_specificity: no negatives");
    if (!(target > 0.0 && target <= 1.0)) throw ConfigError("threshold_for_specificity: target must lie in (0,1]");
    check_scores(neg, "threshold_for_specificity");
    const auto s = sorted_copy(neg);
    const double need = target * static_cast<double>(s.size()) - 1e-9;
    // Walk distinct values; placing theta just above s[k] classifies s[0..k] as negative.
    for (std::size_t i = 0; i < s.size();) {
        std::size_t j = i;
        while (j < s.size() && s[j] == s[i]) ++j;
        if (static_cast<double>(j) >= need) {
            if (j == s.size()) return INFINITY;
            return s[i] + (s[j] - s[i]) / 2.0;
        }
        i = j;
    }
    return INFINITY;
}

Proportion wilson_interval(std::size_t hits, std::size_t n, double level) {
    if (n == 0) throw DataError("wilson_interval: empty group");
    if (hits > n) throw DataError("wilson_interval: hits exceed group size");
    Proportion r;
    r.hits = hits;
    r.n = n;
    r.level = level;
    const double z = z_for(level);
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(hits) / nn;
    r.value = p;
    const double denom = 1.0 + z * z / nn;
    const double center = (p + z * z / (2.0 * nn)) / denom;
    const double half = z / denom * std::sqrt(p * (1.0 - p) / nn + z * z / (4.0 * nn * nn));
    r.lo = hits == 0 ? 0.0 : std::max(0.0, center - half);
    r.hi = hits == n ? 1.0 : std::min(1.0, center + half);
    return r;
}

Proportion hit_ratio(std::span<const double> scores, double threshold, double level) {
    std::size_t hits = 0;
    for (double s : scores)
        if (s >= threshold) ++hits;
    return wilson_interval(hits, scores.size(), level);
}

McNemarResult mcnemar_from_counts(std::size_t b, std::size_t c) {
    McNemarResult r;
    r.b = b;
    r.c = c;
    const std::size_t n = b + c;
    if (n == 0) {
        r.no_discordance = true;
        r.chi2 = 0.0;
        r.p = 1.0;
        r.exact = true;
        return r;
    }
    const double d = std::abs(static_cast<double>(b) - static_cast<double>(c)) - 1.0;
    r.chi2 = d * d / static_cast<double>(n);
    if (n < 25) {
        r.exact = true;
        r.p = std::min(1.0, 2.0 * stats::binomial_cdf(std::min(b, c), n, 0.5));
    } else {
        r.p = stats::chi_square_sf(r.chi2, 1.0);
    }
    return r;
}

McNemarResult mcnemar(std::span<const int> a, std::span<const int> b, std::span<const int> mask) {
    if (a.size() != b.size()) throw DataError("mcnemar: decision vectors differ in length");
    if (!mask.empty() && mask.size() != a.size()) throw DataError("mcnemar: mask length mismatch");
    std::size_t nb = 0, nc = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!mask.empty() && !mask[i]) continue;
        if (a[i] && !b[i]) ++nb;
        if (!a[i] && b[i]) ++nc;
    }
    return mcnemar_from_counts(nb, nc);
}

ConfusionMetrics confusion_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
    ConfusionMetrics m;
    m.tp = tp;
    m.fp = fp;
    m.fn = fn;
    m.tn = tn;
    const double TP = static_cast<double>(tp), FP = static_cast<double>(fp), FN = static_cast<double>(fn),
                 TN = static_cast<double>(tn);
    m.sensitivity = tp + fn ? TP / (TP + FN) : 0.0;
    m.specificity = tn + fp ? TN / (TN + FP) : 0.0;
    const double n = TP + FP + FN + TN;
    m.accuracy = n > 0 ? (TP + TN) / n : 0.0;
    m.precision = tp + fp ? TP / (TP + FP) : 0.0;
    m.f1 = m.precision + m.sensitivity > 0 ? 2 * m.precision * m.sensitivity / (m.precision + m.sensitivity) : 0.0;
    const double den = (TP + FP) * (TP + FN) * (TN + FP) * (TN + FN);
    if (den == 0.0) {
        m.mcc = 0.0;
        m.mcc_degenerate = true;
    } else {
        m.mcc = (TP * TN - FP * FN) / std::sqrt(den);
    }
    return m;
}

ConfusionMetrics confusion_metrics(std::span<const int> decisions, std::span<const int> truth) {
    if (decisions.size() != truth.size()) throw DataError("confusion_metrics: length mismatch");
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] != 0 && truth[i] != 1) throw DataError("confusion_metrics: truth must be binary");
        if (truth[i]) (decisions[i] ? tp : fn)++;
        else (decisions[i] ? fp : tn)++;
    }
    return confusion_from_counts(tp, fp, fn, tn);
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) throw DataError("welch_t_test: each group needs at least 2 values");
    WelchResult r;
    r.n_a = a.size();
    r.n_b = b.size();
    r.mean_a = stats::mean(a);
    r.mean_b = stats::mean(b);
    const double va = stats::sample_variance(a), vb = stats::sample_variance(b);
    r.sd_a = std::sqrt(va);
    r.sd_b = std::sqrt(vb);
    const double qa = va / static_cast<double>(r.n_a), qb = vb / static_cast<double>(r.n_b);
    const double se2 = qa + qb;
    if (!(se2 > 0.0)) {
        r.df = static_cast<double>(r.n_a + r.n_b - 2);
        r.t = r.mean_a == r.mean_b ? 0.0 : (r.mean_a > r.mean_b ? INFINITY : -INFINITY);
        r.p = r.mean_a == r.mean_b ? 1.0 : 0.0;
        return r;
    }
    r.t = (r.mean_a - r.mean_b) / std::sqrt(se2);
    r.df = se2 * se2 / (qa * qa / static_cast<double>(r.n_a - 1) + qb * qb / static_cast<double>(r.n_b - 1));
    r.p = stats::student_t_two_sided(r.t, r.df);
    return r;
}

WelchResult group_slope_comparison(std::span<const int> decisions, std::span<const double> slopes) {
    if (decisions.size() != slopes.size()) throw DataError("group_slope_comparison: length mismatch");
    std::vector<double> prog, stable;
    for (std::size_t i = 0; i < slopes.size(); ++i) (decisions[i] ? prog : stable).push_back(slopes[i]);
    return welch_t_test(prog, stable);
}

std::vector<std::pair<double, double>> roc_curve(std::span<const double> pos, std::span<const double> neg) {
    if (pos.empty() || neg.empty()) throw DataError("roc_curve: both groups must be nonempty");
    std::vector<double> thresholds(pos.begin(), pos.end());
    thresholds.insert(thresholds.end(), neg.begin(), neg.end());
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    const auto sp = sorted_copy(pos), sn = sorted_copy(neg);
    auto at_least = [](const std::vector<double>& s, double t) {
        return static_cast<double>(s.end() - std::lower_bound(s.begin(), s.end(), t)) / static_cast<double>(s.size());
    };
    std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
    for (double t : thresholds) pts.emplace_back(at_least(sn, t), at_least(sp, t));
    if (pts.back() != std::pair<double, double>{1.0, 1.0}) pts.emplace_back(1.0, 1.0);
    return pts;
}

// ------------------------------------------------------------------ report

void evaluate_schemes(EvalReport& report, double target, double level) {
    const std::size_t n = report.truth.size();
    if (report.ids.size() != n) throw DataError("evaluate: id/truth length mismatch");
    std::vector<int> positives_mask(report.truth.begin(), report.truth.end());
    for (auto& s : report.schemes) {
        if (s.scores.size() != n) throw DataError("evaluate: scheme '" + s.name + "' has a score count mismatch");
        std::vector<double> pos, neg;
        for (std::size_t i = 0; i < n; ++i) (report.truth[i] ? pos : neg).push_back(s.scores[i]);
        s.auc = delong_ci(pos, neg, level);
        s.target_specificity = target;
        s.threshold = threshold_for_specificity(neg, target);
        s.achieved_specificity = specificity_at(neg, s.threshold);
        s.decisions.assign(n, 0);
        for (std::size_t i = 0; i < n; ++i) s.decisions[i] = s.scores[i] >= s.threshold ? 1 : 0;
        s.hit = hit_ratio(pos, s.threshold, level);
        s.confusion = confusion_metrics(s.decisions, report.truth);
        s.slopes.reset();
        if (report.ols_slopes.size() == n) {
            std::vector<int> d;
            std::vector<double> sl;
            for (std::size_t i = 0; i < n; ++i)
                if (report.glaucoma.size() != n || report.glaucoma[i]) {
                    d.push_back(s.decisions[i]);
                    sl.push_back(report.ols_slopes[i]);
                }
            try {
                s.slopes = group_slope_comparison(d, sl);
            } catch (const DataError&) {
                // a predicted group with fewer than two windows: comparison not reported
            }
        }
    }
    report.mcnemar.clear();
    for (std::size_t i = 0; i < report.schemes.size(); ++i)
        for (std::size_t j = i + 1; j < report.schemes.size(); ++j)
            report.mcnemar.push_back({report.schemes[i].name, report.schemes[j].name,
                                      mcnemar(report.schemes[i].decisions, report.schemes[j].decisions,
                                              positives_mask)});
}

std::string report_json(const EvalReport& r) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["format"] = "evalreport/1";
    j["truth_source"] = r.truth_source;
    ordered_json meta = ordered_json::object();
    for (const auto& [k, v] : r.metadata) meta[k] = v;
    j["metadata"] = meta;
    std::size_t npos = 0;
    for (int t : r.truth) npos += t;
    j["n_windows"] = r.truth.size();
    j["n_truth_positive"] = npos;
    ordered_json schemes = ordered_json::array();
    for (const auto& s : r.schemes) {
        ordered_json o;
        o["name"] = s.name;
        o["auc"] = {{"value", s.auc.auc}, {"variance", s.auc.variance}, {"lo", s.auc.lo}, {"hi", s.auc.hi},
                    {"level", s.auc.level}, {"method", s.auc.method}, {"degenerate", s.auc.degenerate}};
        o["target_specificity"] = s.target_specificity;
        o["achieved_specificity"] = s.achieved_specificity;
        o["threshold"] = json_number(s.threshold);
        o["hit_ratio"] = {{"value", s.hit.value}, {"hits", s.hit.hits}, {"n", s.hit.n}, {"lo", s.hit.lo},
                          {"hi", s.hit.hi}, {"level", s.hit.level}, {"method", s.hit.method}};
        const auto& c = s.confusion;
        o["confusion"] = {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
        o["metrics"] = {{"sensitivity", c.sensitivity}, {"specificity", c.specificity}, {"accuracy", c.accuracy},
                        {"precision", c.precision},     {"f1", c.f1},                   {"mcc", c.mcc},
                        {"mcc_degenerate", c.mcc_degenerate}};
        if (s.slopes) {
            const auto& w = *s.slopes;
            o["slope_comparison"] = {{"method", "welch_t (substitutes nested mixed model)"},
                                     {"mean_progressing", w.mean_a},
                                     {"sd_progressing", w.sd_a},
                                     {"n_progressing", w.n_a},
                                     {"mean_stable", w.mean_b},
                                     {"sd_stable", w.sd_b},
                                     {"n_stable", w.n_b},
                                     {"t", json_number(w.t)},
                                     {"df", w.df},
                                     {"p", w.p}};
        } else {
            o["slope_comparison"] = nullptr;
        }
        schemes.push_back(o);
    }
    j["schemes"] = schemes;
    ordered_json tests = ordered_json::array();
    for (const auto& t : r.mcnemar) {
        tests.push_back({{"a", t.a},
                         {"b", t.b},
                         {"restricted_to", "truth_positive"},
                         {"b_count", t.result.b},
                         {"c_count", t.result.c},
                         {"chi2", t.result.chi2},
                         {"p", t.result.p},
                         {"exact", t.result.exact},
                         {"no_discordance", t.result.no_discordance}});
    }
    j["mcnemar"] = tests;
    return j.dump(2) + "\n";
}

std::string report_markdown(const EvalReport& r) {
    std::size_t npos = 0;
    for (int t : r.truth) npos += t;
    std::string md = "# Evaluation report\n\n";
    md += "Truth source: " + r.truth_source + "; windows: " + std::to_string(r.truth.size()) +
          "; truth-positive: " + std::to_string(npos) + "\n\n";
    md += "## Matched-specificity comparison\n\n";
    md += "| Method | AUROC (95% CI) | Target spec. | Achieved spec. | Threshold | Hit ratio (95% CI) |\n";
    md += "|---|---|---|---|---|---|\n";
    for (const auto& s : r.schemes) {
        md += "| " + s.name + " | " + num(s.auc.auc) + " (" + num(s.auc.lo) + "–" + num(s.auc.hi) + ") | " +
              num(s.target_specificity) + " | " + num(s.achieved_specificity) + " | " + num(s.threshold, 4) + " | " +
              num(s.hit.value) + " (" + num(s.hit.lo) + "–" + num(s.hit.hi) + ") |\n";
    }
    md += "\n## Classification metrics at the matched threshold\n\n";
    md += "| Method | TP | FP | FN | TN | Sensitivity | Specificity | Accuracy | Precision | F1 | MCC |\n";
    md += "|---|---|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& s : r.schemes) {
        const auto& c = s.confusion;
        md += "| " + s.name + " | " + std::to_string(c.tp) + " | " + std::to_string(c.fp) + " | " +
              std::to_string(c.fn) + " | " + std::to_string(c.tn) + " | " + num(c.sensitivity) + " | " +
              num(c.specificity) + " | " + num(c.accuracy) + " | " + num(c.precision) + " | " + num(c.f1) + " | " +
              num(c.mcc) + (c.mcc_degenerate ? " (degenerate)" : "") + " |\n";
    }
    if (!r.mcnemar.empty()) {
        md += "\n## McNemar tests on truth-positive windows\n\n";
        md += "| A | B | A only | B only | χ² | p | Variant |\n|---|---|---|---|---|---|---|\n";
        for (const auto& t : r.mcnemar)
            md += "| " + t.a + " | " + t.b + " | " + std::to_string(t.result.b) + " | " + std::to_string(t.result.c) +
                  " | " + num(t.result.chi2) + " | " + num(t.result.p, 4) + " | " +
                  (t.result.no_discordance ? "no discordance" : (t.result.exact ? "exact binomial" : "χ², corrected")) +
                  " |\n";
    }
    md += "\n## Global slope by predicted group (Welch t-test, glaucoma windows)\n\n";
    md += "| Method | Progressing (μm/yr) | Stable (μm/yr) | t | p |\n|---|---|---|---|---|\n";
    for (const auto& s : r.schemes) {
        if (!s.slopes) {
            md += "| " + s.name + " | – | – | – | – |\n";
            continue;
        }
        const auto& w = *s.slopes;
        md += "| " + s.name + " | " + num(w.mean_a) + " ± " + num(w.sd_a) + " (n=" + std::to_string(w.n_a) + ") | " +
              num(w.mean_b) + " ± " + num(w.sd_b) + " (n=" + std::to_string(w.n_b) + ") | " + num(w.t) + " | " +
              num(w.p, 4) + " |\n";
    }
    if (!r.metadata.empty()) {
        md += "\n## Metadata\n\n";
        for (const auto& [k, v] : r.metadata) md += "- " + k + ": " + v + "\n";
    }
    return md;
}

std::string report_scores_csv(const EvalReport& r) {
    std::string out = "id,truth";
    const bool slopes = r.ols_slopes.size() == r.truth.size();
    const bool glaucoma = r.glaucoma.size() == r.truth.size();
    if (glaucoma) out += ",glaucoma";
    if (slopes) out += ",ols_slope";
    for (const auto& s : r.schemes) out += "," + s.name + "_score," + s.name + "_decision";
    out += "\n";
    for (std::size_t i = 0; i < r.truth.size(); ++i) {
        out += r.ids[i] + "," + std::to_string(r.truth[i]);
        if (glaucoma) out += "," + std::to_string(r.glaucoma[i]);
        if (slopes) out += "," + format_double(r.ols_slopes[i]);
        for (const auto& s : r.schemes)
            out += "," + format_double(s.scores[i]) + "," +
                   (s.decisions.size() == r.truth.size() ? std::to_string(s.decisions[i]) : "");
        out += "\n";
    }
    return out;
}

std::string report_roc_svg(const EvalReport& r, const std::string& config_hash) {
    constexpr int W = 640, H = 480, L = 70, R = 170, T = 30, B = 60;
    const double pw = W - L - R, ph = H - T - B;
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};
    auto X = [&](double f) { return format_fixed(L + f * pw, 2); };
    auto Y = [&](double t) { return format_fixed(T + (1.0 - t) * ph, 2); };
    std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" viewBox=\"0 0 640 480\">\n";
    s += "<!-- evalreport/1 config-hash: " + config_hash + " -->\n";
    s += "<rect x=\"0\" y=\"0\" width=\"640\" height=\"480\" fill=\"white\"/>\n";
    s += "<rect x=\"" + X(0) + "\" y=\"" + Y(1) + "\" width=\"" + format_fixed(pw, 2) + "\" height=\"" +
         format_fixed(ph, 2) + "\" fill=\"none\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + X(0) + "\" y1=\"" + Y(0) + "\" x2=\"" + X(1) + "\" y2=\"" + Y(1) +
         "\" stroke=\"#999\" stroke-dasharray=\"4 4\"/>\n";
    for (int k = 0; k <= 5; ++k) {
        const double v = k / 5.0;
        s += "<text x=\"" + X(v) + "\" y=\"" + format_fixed(T + ph + 18, 2) +
             "\" font-size=\"11\" text-anchor=\"middle\">" + format_fixed(v, 1) + "</text>\n";
        s += "<text x=\"" + format_fixed(L - 8, 2) + "\" y=\"" + Y(v) +
             "\" font-size=\"11\" text-anchor=\"end\" dominant-baseline=\"middle\">" + format_fixed(v, 1) +
             "</text>\n";
    }
    s += "<text x=\"" + X(0.5) + "\" y=\"" + std::to_string(H - 18) +
         "\" font-size=\"13\" text-anchor=\"middle\">False positive rate</text>\n";
    s += "<text x=\"18\" y=\"" + Y(0.5) + "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
         Y(0.5) + ")\">True positive rate</text>\n";
    std::vector<double> pos_idx;
    for (std::size_t k = 0; k < r.schemes.size(); ++k) {
        const auto& sc = r.schemes[k];
        std::vector<double> pos, neg;
        for (std::size_t i = 0; i < r.truth.size(); ++i) (r.truth[i] ? pos : neg).push_back(sc.scores[i]);
        if (pos.empty() || neg.empty()) continue;
        const char* color = colors[k % 7];
        s += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"";
        bool first = true;
        for (const auto& [f, t] : roc_curve(pos, neg)) {
            if (!first) s += " ";
            s += X(f) + "," + Y(t);
            first = false;
        }
        s += "\"/>\n";
        const double ly = T + 14 + 20.0 * static_cast<double>(k);
        s += "<line x1=\"" + std::to_string(W - R + 12) + "\" y1=\"" + format_fixed(ly, 2) + "\" x2=\"" +
             std::to_string(W - R + 32) + "\" y2=\"" + format_fixed(ly, 2) + "\" stroke=\"" + color +
             "\" stroke-width=\"2\"/>\n";
        s += "<text x=\"" + std::to_string(W - R + 38) + "\" y=\"" + format_fixed(ly, 2) +
             "\" font-size=\"11\" dominant-baseline=\"middle\">" + sc.name + " (" + num(sc.auc.auc) + ")</text>\n";
    }
    s += "</svg>\n";
    return s;
}

std::vector<std::filesystem::path> write_report(const EvalReport& r, const std::filesystem::path& dir,
                                                const std::string& config_hash) {
    std::vector<std::filesystem::path> out{dir / "report.json", dir / "report.md", dir / "scores.csv",
                                           dir / "roc.svg"};
    write_file(out[0], report_json(r));
    write_file(out[1], report_markdown(r));
    write_file(out[2], report_scores_csv(r));
    write_file(out[3], report_roc_svg(r, config_hash));
    return out;
}

}  // namespace weakprog
