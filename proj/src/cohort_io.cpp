#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "weakprog/error.hpp"
#include "weakprog/simcohort.hpp"

namespace weakprog {

namespace {

constexpr const char* kCohortFormat = "simcohort/1";

std::string truth_line(const EyeSeries& e) {
    const auto& t = e.truth;
    std::string line = "truth " + std::to_string(e.subject_id) + " " + std::to_string(e.eye_id) + " " +
                       (t.is_progressing ? "1" : "0") + " " + (t.onset_t ? format_double(*t.onset_t) : "na") + " " +
                       format_double(t.aging_slope) + " " + format_double(t.progression_slope) + " " +
                       std::to_string(t.sector_center);
    return line;
}

[[noreturn]] void fail(const std::string& origin, std::size_t line_no, const std::string& what) {
    throw DataError(origin + ":" + std::to_string(line_no) + ": " + what);
}

}  // namespace

std::string cohort_to_string(const Cohort& cohort) {
    std::ostringstream os;
    os << kCohortFormat << "\n[config]\n";
    KvConfig kv;
    cohort.config.to_kv(kv);
    os << kv.canonical();
    os << "[eyes]\n";
    for (const auto& e : cohort.eyes) {
        os << "eye " << e.subject_id << " " << e.eye_id << " " << to_string(e.group) << " " << e.visits.size() << "\n";
        for (const auto& v : e.visits) {
            os << "visit " << format_double(v.t) << " " << format_double(v.age) << " " << (v.quality_ok ? 1 : 0) << " ";
            for (std::size_t p = 0; p < v.profile.size(); ++p) {
                if (p) os << ",";
                os << format_fixed(v.profile[p], 4);
            }
            os << "\n";
        }
    }
    std::string truth;
    for (const auto& e : cohort.eyes) truth += truth_line(e) + "\n";
    os << "[truth]\n" << truth;
    os << "[checksum]\ntruth fnv1a64 " << hex64(fnv1a64(truth)) << "\n";
    return os.str();
}

Cohort cohort_from_string(const std::string& text, const std::string& origin) {
    const auto lines = split(text, '\n');
    if (lines.empty() || trim(lines[0]) != kCohortFormat)
        throw DataError(origin + ": not a " + std::string(kCohortFormat) + " file");

    enum class Section { none, config, eyes, truth, checksum } section = Section::none;
    std::string config_text;
    std::string truth_text;
    std::optional<std::string> checksum;
    Cohort cohort;
    EyeSeries* current = nullptr;
    std::size_t expected_visits = 0;
    std::map<std::pair<std::uint32_t, std::uint32_t>, EyeTruth> truths;

    auto close_eye = [&](std::size_t line_no) {
        if (current && current->visits.size() != expected_visits)
            fail(origin, line_no, "eye " + std::to_string(current->subject_id) + "/" + std::to_string(current->eye_id) +
                                      " declares " + std::to_string(expected_visits) + " visits but has " +
                                      std::to_string(current->visits.size()));
    };

    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t line_no = i + 1;
        const std::string_view line = trim(lines[i]);
        if (line.empty()) continue;
        if (line == "[config]") { section = Section::config; continue; }
        if (line == "[eyes]") { section = Section::eyes; continue; }
        if (line == "[truth]") { close_eye(line_no); current = nullptr; section = Section::truth; continue; }
        if (line == "[checksum]") { section = Section::checksum; continue; }

        switch (section) {
        case Section::none:
            fail(origin, line_no, "record outside of any section");
        case Section::config:
            config_text += std::string(line) + "\n";
            break;
        case Section::eyes: {
            const auto f = split(line, ' ');
            if (f[0] == "eye") {
                close_eye(line_no);
                if (f.size() != 5) fail(origin, line_no, "eye record needs 4 fields");
                EyeSeries e;
                e.subject_id = static_cast<std::uint32_t>(parse_u64(f[1], "subject_id"));
                e.eye_id = static_cast<std::uint32_t>(parse_u64(f[2], "eye_id"));
                try {
                    e.group = group_from_string(f[3]);
                } catch (const DataError& err) {
                    fail(origin, line_no, err.what());
                }
                expected_visits = parse_u64(f[4], "visit count");
                cohort.eyes.push_back(std::move(e));
                current = &cohort.eyes.back();
            } else if (f[0] == "visit") {
                if (!current) fail(origin, line_no, "visit before any eye record");
                if (f.size() != 5) fail(origin, line_no, "visit record needs 4 fields");
                VisitRecord v;
                v.t = parse_double(f[1], "visit t");
                v.age = parse_double(f[2], "visit age");
                if (f[3] != "0" && f[3] != "1") fail(origin, line_no, "quality flag must be 0 or 1");
                v.quality_ok = f[3] == "1";
                for (const auto& s : split(f[4], ',')) v.profile.push_back(parse_double(s, "thickness"));
                v.global_mean = mean_of(v.profile);
                if (v.t < 0.0) fail(origin, line_no, "negative visit time");
                if (!current->visits.empty() && !(v.t > current->visits.back().t))
                    fail(origin, line_no, "visit times out of order");
                current->visits.push_back(std::move(v));
            } else {
                fail(origin, line_no, "unknown record '" + f[0] + "'");
            }
            break;
        }
        case Section::truth: {
            truth_text += std::string(line) + "\n";
            const auto f = split(line, ' ');
            if (f.size() != 8 || f[0] != "truth") fail(origin, line_no, "truth record needs 7 fields");
            EyeTruth t;
            const auto subject = static_cast<std::uint32_t>(parse_u64(f[1], "subject_id"));
            const auto eye = static_cast<std::uint32_t>(parse_u64(f[2], "eye_id"));
            t.is_progressing = f[3] == "1";
            if (f[4] != "na") t.onset_t = parse_double(f[4], "onset_t");
            t.aging_slope = parse_double(f[5], "aging_slope");
            t.progression_slope = parse_double(f[6], "progression_slope");
            t.sector_center = static_cast<std::uint32_t>(parse_u64(f[7], "sector_center"));
            if (t.is_progressing != t.onset_t.has_value())
                fail(origin, line_no, "onset_t must be present exactly for progressing eyes");
            truths[{subject, eye}] = std::move(t);
            break;
        }
        case Section::checksum: {
            const auto f = split(line, ' ');
            if (f.size() != 3 || f[0] != "truth" || f[1] != "fnv1a64") fail(origin, line_no, "malformed checksum record");
            checksum = f[2];
            break;
        }
        }
    }
    if (!checksum) throw DataError(origin + ": missing truth checksum");
    if (*checksum != hex64(fnv1a64(truth_text))) throw DataError(origin + ": truth-section checksum mismatch");

    try {
        cohort.config = SimulatorConfig::from_kv(KvConfig::parse(config_text, origin));
    } catch (const ConfigError& e) {
        throw DataError(e.what());
    }
    const auto P = cohort.config.profile_len;
    for (auto& e : cohort.eyes) {
        auto it = truths.find({e.subject_id, e.eye_id});
        if (it == truths.end())
            throw DataError(origin + ": no truth record for eye " + std::to_string(e.subject_id) + "/" +
                            std::to_string(e.eye_id));
        e.truth = it->second;
        if (e.truth.sector_center >= P) throw DataError(origin + ": sector_center out of range");
        e.truth.sector_mask = sector_mask(P, e.truth.sector_center, cohort.config.sector_width_fraction);
        if (e.group == Group::healthy && e.truth.is_progressing)
            throw DataError(origin + ": healthy eye marked progressing");
        for (const auto& v : e.visits)
            if (v.profile.size() != P) throw DataError(origin + ": profile length differs from profile_len");
    }
    if (truths.size() != cohort.eyes.size()) throw DataError(origin + ": truth records do not match eye records");
    return cohort;
}

void cohort_to_disk(const Cohort& cohort, const std::filesystem::path& path) {
    write_file(path, cohort_to_string(cohort));
}

Cohort cohort_from_disk(const std::filesystem::path& path) {
    return cohort_from_string(read_file(path), path.string());
}

}  // namespace weakprog
