#include <sstream>

#include "weakprog/error.hpp"
#include "weakprog/sequences.hpp"

namespace weakprog {

namespace {

constexpr const char* kSeqsetFormat = "seqset/1";

template <typename T, typename F>
std::string join(const std::vector<T>& v, F&& fmt) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += fmt(v[i]);
    }
    return s;
}

[[noreturn]] void fail(const std::string& origin, std::size_t line_no, const std::string& what) {
    throw DataError(origin + ":" + std::to_string(line_no) + ": " + what);
}

}  // namespace

std::string seqset_to_string(std::span<const SequenceObservation> seqs) {
    std::ostringstream os;
    os << kSeqsetFormat << "\n[meta]\n";
    os << "count = " << seqs.size() << "\n";
    os << "tau = " << (seqs.empty() ? 0 : seqs.front().view.tau) << "\n";
    os << "P = " << (seqs.empty() ? 0 : seqs.front().view.P) << "\n";
    os << "[observations]\n";
    for (const auto& s : seqs) {
        const auto& o = s.view;
        os << "obs " << o.subject_id << " " << o.eye_id << " " << o.window_index << " " << o.pu_label << " "
           << o.noise_label << " " << join(o.permutation, [](std::uint32_t v) { return std::to_string(v); }) << " "
           << join(o.times, format_double) << "\n";
        for (std::uint32_t t = 0; t < o.tau; ++t) {
            const auto r = o.row(t);
            os << "row " << join(std::vector<double>(r.begin(), r.end()), format_double) << "\n";
        }
    }
    std::string trailer;
    for (std::size_t i = 0; i < seqs.size(); ++i) {
        const auto& s = seqs[i];
        trailer += "label " + std::to_string(i) + " " +
                   (s.view.external_label ? std::to_string(*s.view.external_label) : std::string("na")) + " " +
                   (s.truth_progressing ? "1" : "0") + "\n";
    }
    os << "[trailer]\n" << trailer;
    os << "[checksum]\ntrailer fnv1a64 " << hex64(fnv1a64(trailer)) << "\n";
    return os.str();
}

std::vector<SequenceObservation> seqset_from_string(const std::string& text, const std::string& origin) {
    const auto lines = split(text, '\n');
    if (lines.empty() || trim(lines[0]) != kSeqsetFormat)
        throw DataError(origin + ": not a " + std::string(kSeqsetFormat) + " file");
    enum class Section { none, meta, observations, trailer, checksum } section = Section::none;
    std::string meta_text;
    std::string trailer_text;
    std::optional<std::string> checksum;
    std::vector<SequenceObservation> out;
    std::size_t labels_seen = 0;

    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t line_no = i + 1;
        const std::string_view line = trim(lines[i]);
        if (line.empty()) continue;
        if (line == "[meta]") { section = Section::meta; continue; }
        if (line == "[observations]") { section = Section::observations; continue; }
        if (line == "[trailer]") { section = Section::trailer; continue; }
        if (line == "[checksum]") { section = Section::checksum; continue; }
        const auto f = split(line, ' ');
        switch (section) {
        case Section::none:
            fail(origin, line_no, "record outside of any section");
        case Section::meta:
            meta_text += std::string(line) + "\n";
            break;
        case Section::observations:
            if (f[0] == "obs") {
                if (f.size() != 8) fail(origin, line_no, "obs record needs 7 fields");
                SequenceObservation s;
                auto& o = s.view;
                o.subject_id = static_cast<std::uint32_t>(parse_u64(f[1], "subject_id"));
                o.eye_id = static_cast<std::uint32_t>(parse_u64(f[2], "eye_id"));
                o.window_index = static_cast<std::uint32_t>(parse_u64(f[3], "window_index"));
                o.pu_label = static_cast<int>(parse_int(f[4], "pu_label"));
                o.noise_label = static_cast<int>(parse_int(f[5], "noise_label"));
                for (const auto& p : split(f[6], ',')) o.permutation.push_back(static_cast<std::uint32_t>(parse_u64(p, "permutation")));
                for (const auto& t : split(f[7], ',')) o.times.push_back(parse_double(t, "times"));
                o.tau = static_cast<std::uint32_t>(o.times.size());
                if (o.permutation.size() != o.tau) fail(origin, line_no, "permutation length differs from tau");
                out.push_back(std::move(s));
            } else if (f[0] == "row") {
                if (out.empty() || f.size() != 2) fail(origin, line_no, "malformed row record");
                auto& o = out.back().view;
                const auto vals = split(f[1], ',');
                if (o.P == 0) o.P = static_cast<std::uint32_t>(vals.size());
                if (vals.size() != o.P) fail(origin, line_no, "row length differs within observation");
                for (const auto& v : vals) o.x.push_back(parse_double(v, "row value"));
                if (o.x.size() > static_cast<std::size_t>(o.tau) * o.P) fail(origin, line_no, "too many rows");
            } else {
                fail(origin, line_no, "unknown record '" + f[0] + "'");
            }
            break;
        case Section::trailer: {
            trailer_text += std::string(line) + "\n";
            if (f.size() != 4 || f[0] != "label") fail(origin, line_no, "malformed label record");
            const auto idx = parse_u64(f[1], "label index");
            if (idx != labels_seen || idx >= out.size()) fail(origin, line_no, "label index out of sequence");
            auto& s = out[idx];
            if (f[2] != "na") s.view.external_label = static_cast<int>(parse_int(f[2], "external_label"));
            s.truth_progressing = f[3] == "1";
            ++labels_seen;
            break;
        }
        case Section::checksum:
            if (f.size() != 3 || f[0] != "trailer" || f[1] != "fnv1a64") fail(origin, line_no, "malformed checksum");
            checksum = f[2];
            break;
        }
    }
    if (!checksum) throw DataError(origin + ": missing trailer checksum");
    if (*checksum != hex64(fnv1a64(trailer_text))) throw DataError(origin + ": trailer checksum mismatch");
    if (labels_seen != out.size()) throw DataError(origin + ": trailer does not cover every observation");
    const auto meta = KvConfig::parse(meta_text, origin);
    if (static_cast<std::size_t>(meta.get_int("count", -1)) != out.size())
        throw DataError(origin + ": observation count differs from header");
    for (const auto& s : out) {
        if (s.view.x.size() != static_cast<std::size_t>(s.view.tau) * s.view.P)
            throw DataError(origin + ": observation with missing rows");
        if (s.view.is_identity())
            for (std::size_t t = 1; t < s.view.times.size(); ++t)
                if (!(s.view.times[t] > s.view.times[t - 1]))
                    throw DataError(origin + ": times out of order in an original observation");
    }
    return out;
}

void seqset_to_disk(std::span<const SequenceObservation> seqs, const std::filesystem::path& path) {
    write_file(path, seqset_to_string(seqs));
}

std::vector<SequenceObservation> seqset_from_disk(const std::filesystem::path& path) {
    return seqset_from_string(read_file(path), path.string());
}

}  // namespace weakprog
