#include "weakprog/cli.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <map>
#include <optional>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"

#include "weakprog/baselines.hpp"
#include "weakprog/error.hpp"
#include "weakprog/eval.hpp"
#include "weakprog/pipeline.hpp"
#include "weakprog/sequences.hpp"
#include "weakprog/simcohort.hpp"
#include "weakprog/textio.hpp"
#include "weakprog/training.hpp"

namespace weakprog::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string hash_text(std::string_view s) { return hex64(fnv1a64(s)); }
std::string hash_file(const fs::path& p) { return hash_text(read_file(p)); }

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string obs_id(const Observation& o) { return window_id(o); }

// ------------------------------------------------------------------ config

std::set<std::string> known_keys() {
    KvConfig kv;
    SimulatorConfig{}.to_kv(kv, "sim.");
    TrainConfig{}.to_kv(kv);
    GpaConfig{}.to_kv(kv);
    std::set<std::string> keys;
    for (const auto& [k, v] : kv.values()) keys.insert(k);
    for (const char* k : {"prepare.tau", "prepare.require_quality", "prepare.split", "prepare.seed",
                          "evaluate.target_specificity", "evaluate.truth", "evaluate.level"})
        keys.insert(k);
    return keys;
}

struct Globals {
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
    bool quiet = false;
    std::vector<std::string> overrides;
};

/// Config file (optional) + `--set key=value` overrides + `--seed`, checked against the known schema.
KvConfig load_config(const std::string& path, const Globals& g) {
    KvConfig kv = path.empty() ? KvConfig::parse("", "<command line>") : KvConfig::load(path);
    for (const auto& o : g.overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("--set: expected key=value, got '" + o + "'");
        kv.set(std::string(trim(o.substr(0, eq))), std::string(trim(o.substr(eq + 1))));
    }
    if (g.seed) {
        const auto s = std::to_string(*g.seed);
        for (const char* k : {"sim.seed", "prepare.seed", "train.seed", "model.init_seed"}) kv.set(k, s);
    }
    static const auto keys = known_keys();
    for (const auto& [k, v] : kv.values())
        if (!keys.count(k)) throw ConfigError(kv.origin() + ": unknown field '" + k + "'");
    return kv;
}

// ------------------------------------------------------------------ manifest

class Manifest {
public:
    Manifest(std::string command, fs::path dir) : command_(std::move(command)), dir_(std::move(dir)) {
        started_ = utc_now();
    }

    void input(const fs::path& p) { inputs_.emplace_back(p.generic_string(), hash_file(p)); }

    /// Records the config hash of the command that produced `dir`, when it left a manifest.
    void upstream(const fs::path& dir) {
        const auto m = dir / "manifest.json";
        if (!fs::exists(m)) return;
        json j;
        try {
            j = json::parse(read_file(m));
        } catch (const json::exception&) {
            throw DataError(m.string() + ": malformed manifest");
        }
        upstream_.push_back({{"path", dir.generic_string()},
                             {"command", j.value("command", "")},
                             {"config_hash", j.value("config_hash", "")},
                             {"status", j.value("status", "")}});
    }

    std::string config_hash;
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;

    void finish(const std::string& status, const std::string& error = {}) {
        std::vector<std::string> files;
        if (fs::exists(dir_))
            for (const auto& e : fs::recursive_directory_iterator(dir_))
                if (e.is_regular_file()) {
                    const auto rel = fs::relative(e.path(), dir_).generic_string();
                    if (rel != "manifest.json") files.push_back(rel);
                }
        std::sort(files.begin(), files.end());
        json j;
        j["schema"] = "runmanifest/1";
        j["tool_version"] = kToolVersion;
        j["command"] = command_;
        j["status"] = status;
        if (!error.empty()) j["error"] = error;
        j["config_hash"] = config_hash;
        j["seed"] = seed ? json(*seed) : json(nullptr);
        j["threads"] = threads;
        j["started"] = started_;
        j["finished"] = utc_now();
        json in = json::array();
        for (const auto& [p, h] : inputs_) in.push_back({{"path", p}, {"hash", h}});
        j["inputs"] = in;
        j["upstream"] = upstream_.empty() ? json::array() : json(upstream_);
        json out = json::array();
        for (const auto& f : files) {
            const auto bytes = read_file(dir_ / f);
            out.push_back({{"path", f}, {"hash", hash_text(bytes)}, {"bytes", bytes.size()}});
        }
        j["outputs"] = out;
        write_file(dir_ / "manifest.json", j.dump(2) + "\n");
    }

private:
    std::string command_;
    fs::path dir_;
    std::string started_;
    std::vector<std::pair<std::string, std::string>> inputs_;
    std::vector<json> upstream_;
};

struct Session {
    Globals globals;
    std::string command_line;
    std::optional<Manifest> manifest;
    std::ostream* out = nullptr;
    std::ostream* err = nullptr;

    Manifest& open(const fs::path& dir) {
        fs::create_directories(dir);
        manifest.emplace(command_line, dir);
        manifest->seed = globals.seed;
        manifest->threads = globals.threads;
        return *manifest;
    }
    void say(const std::string& line) const {
        if (!globals.quiet) *out << line << "\n";
    }
};

void require_dir(const fs::path& p, const std::string& what) {
    if (!fs::is_directory(p)) throw DataError(what + ": not a directory: " + p.string());
}

// ------------------------------------------------------------------ dataset access

struct Dataset {
    fs::path dir;
    KvConfig config;
    std::vector<SequenceObservation> train, validation, test;
};

Dataset load_dataset(const fs::path& dir, Manifest& m, bool need_train) {
    require_dir(dir, "--data");
    Dataset d;
    d.dir = dir;
    d.config = KvConfig::load(dir / "config.ini");
    m.input(dir / "config.ini");
    if (need_train) {
        d.train = seqset_from_disk(dir / "train.seqset");
        d.validation = seqset_from_disk(dir / "validation.seqset");
        m.input(dir / "train.seqset");
        m.input(dir / "validation.seqset");
    }
    d.test = seqset_from_disk(dir / "test.seqset");
    m.input(dir / "test.seqset");
    m.upstream(dir);
    return d;
}

std::string test_scores_csv(std::span<const SequenceObservation> test, std::span<const double> scores) {
    std::string s = "id,score\n";
    for (std::size_t i = 0; i < test.size(); ++i) s += obs_id(test[i].view) + "," + format_double(scores[i]) + "\n";
    return s;
}

/// run.ini shared by model and baseline runs; evaluate keys on it.
void write_run_ini(const fs::path& run, const std::string& name, const std::string& kind, const std::string& method,
                   const std::string& config_hash, const Dataset& d) {
    KvConfig kv;
    kv.set("run.name", name);
    kv.set("run.kind", kind);
    kv.set("run.method", method);
    kv.set("run.config_hash", config_hash);
    kv.set("run.test_hash", hash_file(d.dir / "test.seqset"));
    write_file(run / "run.ini", kv.canonical());
}

// ------------------------------------------------------------------ commands

void cmd_simulate(Session& s, const std::string& config, const fs::path& out) {
    const auto kv = load_config(config, s.globals);
    const auto cfg = SimulatorConfig::from_kv(kv, "sim.");
    auto& m = s.open(out);
    if (!config.empty()) m.input(config);
    KvConfig echo;
    cfg.to_kv(echo, "sim.");
    m.config_hash = hash_text(echo.canonical());
    m.seed = cfg.seed;
    const auto cohort = generate_cohort(cfg, s.globals.threads);
    write_file(out / "config.ini", echo.canonical());
    cohort_to_disk(cohort, out / "cohort.txt");
    m.finish("ok");
    s.say("simulate: " + std::to_string(cohort.eyes.size()) + " eyes -> " + (out / "cohort.txt").string());
}

void cmd_prepare(Session& s, const std::string& config, const fs::path& cohort_in, const std::string& scheme_name,
                 const fs::path& out) {
    const auto kv = load_config(config, s.globals);
    const Scheme scheme = scheme_from_string(scheme_name);
    const auto cfg = PrepareConfig::from_kv(kv);

    const fs::path cohort_path = fs::is_directory(cohort_in) ? cohort_in / "cohort.txt" : cohort_in;
    auto& m = s.open(out);
    if (!config.empty()) m.input(config);
    m.input(cohort_path);
    m.upstream(cohort_path.parent_path().empty() ? fs::path(".") : cohort_path.parent_path());
    const auto cohort = cohort_from_disk(cohort_path);

    KvConfig echo;
    echo.set("prepare.scheme", to_string(scheme));
    echo.set("prepare.cohort_hash", hash_file(cohort_path));
    cfg.to_kv(echo);
    m.config_hash = hash_text(echo.canonical());
    m.seed = cfg.seed;

    const auto d = prepare_dataset(cohort, scheme, cfg);
    std::string split_csv = "subject,partition\n";
    for (const auto& [subject, part] : d.split.subject_partition)
        split_csv += std::to_string(subject) + "," + to_string(part) + "\n";

    write_file(out / "config.ini", echo.canonical());
    write_file(out / "split.csv", split_csv);
    seqset_to_disk(d.train, out / "train.seqset");
    seqset_to_disk(d.validation, out / "validation.seqset");
    seqset_to_disk(d.test, out / "test.seqset");
    m.finish("ok");
    s.say("prepare: " + std::to_string(d.train.size()) + "/" + std::to_string(d.validation.size()) + "/" +
          std::to_string(d.test.size()) + " windows (train/validation/test) -> " + out.string());
}

void cmd_train(Session& s, const std::string& config, const fs::path& data, const std::string& scheme_name,
               const std::string& name, const fs::path& run) {
    auto kv = load_config(config, s.globals);
    if (!scheme_name.empty()) kv.set("train.scheme", scheme_name);
    auto& m = s.open(run);
    if (!config.empty()) m.input(config);
    const auto d = load_dataset(data, m, true);
    if (d.train.empty() || d.validation.empty() || d.test.empty())
        throw DataError(data.string() + ": every partition must hold at least one window");
    const auto& v0 = d.train.front().view;
    if (!kv.has("model.P")) kv.set("model.P", std::to_string(v0.P));
    if (!kv.has("model.tau")) kv.set("model.tau", std::to_string(v0.tau));
    const auto cfg = TrainConfig::from_kv(kv);
    m.config_hash = hash_text(cfg.canonical());
    m.seed = cfg.seed;

    TrainOptions opts;
    opts.run_dir = run;
    if (!s.globals.quiet)
        opts.on_epoch = [&s](const EpochRecord& r) {
            *s.err << "epoch " << r.epoch << " train_loss " << format_fixed(r.train_loss, 5) << " val_loss "
                   << format_fixed(r.val_loss, 5) << " sens+spec "
                   << format_fixed(r.val_sensitivity + r.val_specificity, 3) << (r.improved ? " *" : "") << "\n";
        };
    const auto train_views = views_of(d.train);
    const auto val_views = views_of(d.validation);
    const auto result = train(train_views, val_views, cfg, opts);
    const auto heads = cfg.score_heads();
    const auto scores = predict_score(result.selected, views_of(d.test), heads);
    write_file(run / "test_scores.csv", test_scores_csv(d.test, scores));
    write_run_ini(run, name.empty() ? to_string(cfg.scheme) : name, "model", to_string(cfg.scheme), m.config_hash, d);
    m.finish("ok");
    s.say("train: selected epoch " + std::to_string(result.history.selected_epoch) + " -> " + run.string());
}

void cmd_baseline(Session& s, const std::string& config, const fs::path& data, const std::string& which,
                  const std::string& name, const fs::path& run) {
    const auto kv = load_config(config, s.globals);
    if (which != "ols" && which != "gpa") throw ConfigError("--which: expected 'ols' or 'gpa', got '" + which + "'");
    const auto gcfg = GpaConfig::from_kv(kv);
    auto& m = s.open(run);
    if (!config.empty()) m.input(config);
    const auto d = load_dataset(data, m, false);
    KvConfig echo;
    echo.set("baseline.which", which);
    if (which == "gpa") gcfg.to_kv(echo);
    m.config_hash = hash_text(echo.canonical());

    std::vector<double> scores;
    scores.reserve(d.test.size());
    for (const auto& w : d.test)
        scores.push_back(which == "ols" ? ols_score(ols_window(w.view)) : gpa_window_score(w.view, gcfg));
    write_file(run / "config.ini", echo.canonical());
    write_file(run / "test_scores.csv", test_scores_csv(d.test, scores));
    write_run_ini(run, name.empty() ? which : name, "baseline", which, m.config_hash, d);
    m.finish("ok");
    s.say("baseline: " + which + " scored " + std::to_string(scores.size()) + " windows -> " + run.string());
}

std::vector<double> read_test_scores(const fs::path& path, std::span<const SequenceObservation> test) {
    const auto text = read_file(path);
    const auto lines = split(text, '\n');
    if (lines.empty() || trim(lines[0]) != "id,score") throw DataError(path.string() + ": expected header 'id,score'");
    std::vector<double> scores;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        const auto f = split(lines[i], ',');
        const std::size_t k = scores.size();
        if (f.size() != 2) throw DataError(path.string() + ":" + std::to_string(i + 1) + ": expected 2 fields");
        if (k >= test.size() || f[0] != obs_id(test[k].view))
            throw DataError(path.string() + ":" + std::to_string(i + 1) + ": window does not match the test partition");
        scores.push_back(parse_double(f[1], path.string() + ": score"));
    }
    if (scores.size() != test.size())
        throw DataError(path.string() + ": " + std::to_string(scores.size()) + " scores for " +
                        std::to_string(test.size()) + " test windows");
    return scores;
}

void emit_summary(const Session& s, const EvalReport& r) {
    for (const auto& e : r.schemes)
        s.say("  " + e.name + ": auc " + format_fixed(e.auc.auc, 3) + ", specificity " +
              format_fixed(e.achieved_specificity, 3) + ", hit ratio " + format_fixed(e.hit.value, 3));
}

void cmd_evaluate(Session& s, const std::string& config, const fs::path& data, const std::vector<std::string>& runs,
                  std::optional<double> target_flag, const std::string& truth_flag, const fs::path& out) {
    const auto kv = load_config(config, s.globals);
    const double target = target_flag ? *target_flag : kv.get_double("evaluate.target_specificity", 0.95);
    const double level = kv.get_double("evaluate.level", 0.95);
    const std::string truth = truth_flag.empty() ? kv.get_string("evaluate.truth", "simulator") : truth_flag;
    if (!(target > 0.0 && target < 1.0)) throw ConfigError("evaluate.target_specificity must lie in (0,1)");
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("evaluate.level must lie in (0,1)");
    if (truth != "simulator" && truth != "gpa") throw ConfigError("evaluate.truth: expected 'simulator' or 'gpa'");
    if (runs.empty()) throw ConfigError("--runs: at least one run directory is required");

    auto& m = s.open(out);
    if (!config.empty()) m.input(config);
    const auto d = load_dataset(data, m, false);
    const auto test_hash = hash_file(data / "test.seqset");

    EvalReport r = report_rows(d.test, truth == "gpa");
    KvConfig echo;  // eval.ini: everything `report` needs besides scores.csv
    echo.set("evaluate.target_specificity", format_double(target));
    echo.set("evaluate.level", format_double(level));
    echo.set("evaluate.truth", truth);
    echo.set("meta.test_hash", test_hash);
    echo.set("meta.target_specificity", format_double(target));
    echo.set("meta.auc_ci_method", "delong");
    echo.set("meta.hit_ratio_ci_method", "wilson");
    echo.set("meta.slope_test", "welch (substitutes the nested mixed model)");
    std::set<std::string> names;
    for (const auto& rd : runs) {
        const fs::path dir(rd);
        require_dir(dir, "--runs");
        const auto ini = KvConfig::load(dir / "run.ini");
        m.input(dir / "run.ini");
        m.input(dir / "test_scores.csv");
        m.upstream(dir);
        const auto name = ini.get_string("run.name", "");
        if (name.empty() || name.find_first_of(",/ ") != std::string::npos)
            throw ConfigError((dir / "run.ini").string() + ": field 'run.name' is missing or not a plain token");
        if (!names.insert(name).second) throw ConfigError("--runs: duplicate run name '" + name + "'");
        if (ini.get_string("run.test_hash", "") != test_hash)
            throw DataError((dir / "run.ini").string() + ": run was scored on a different test partition");
        SchemeEval e;
        e.name = name;
        e.scores = read_test_scores(dir / "test_scores.csv", d.test);
        r.schemes.push_back(std::move(e));
        echo.set("meta.config_hash." + name, ini.get_string("run.config_hash", ""));
    }
    for (const auto& [k, v] : echo.values())
        if (k.rfind("meta.", 0) == 0) r.metadata.emplace_back(k.substr(5), v);
    m.config_hash = hash_text(echo.canonical());
    evaluate_schemes(r, target, level);
    write_file(out / "eval.ini", echo.canonical());
    write_report(r, out, m.config_hash);
    m.finish("ok");
    s.say("evaluate: " + std::to_string(r.ids.size()) + " test windows, truth " + truth + " -> " + out.string());
    emit_summary(s, r);
}

/// Rebuilds the report from an evaluation directory (eval.ini + scores.csv).
EvalReport rebuild_report(const fs::path& dir, Manifest* m, std::string& config_hash) {
    const auto ini = KvConfig::load(dir / "eval.ini");
    const auto csv_path = dir / "scores.csv";
    const auto text = read_file(csv_path);
    if (m) {
        m->input(dir / "eval.ini");
        m->input(csv_path);
        m->upstream(dir);
    }
    config_hash = hash_text(ini.canonical());
    EvalReport r;
    r.truth_source = ini.get_string("evaluate.truth", "simulator");
    for (const auto& [k, v] : ini.values())
        if (k.rfind("meta.", 0) == 0) r.metadata.emplace_back(k.substr(5), v);
    const auto lines = split(text, '\n');
    if (lines.empty()) throw DataError(csv_path.string() + ": empty file");
    const auto header = split(lines[0], ',');
    if (header.size() < 4 || header[0] != "id" || header[1] != "truth" || header[2] != "glaucoma" ||
        header[3] != "ols_slope" || (header.size() - 4) % 2 != 0)
        throw DataError(csv_path.string() + ": unexpected header");
    for (std::size_t c = 4; c < header.size(); c += 2) {
        const auto& h = header[c];
        if (h.size() <= 6 || h.substr(h.size() - 6) != "_score")
            throw DataError(csv_path.string() + ": unexpected column '" + h + "'");
        SchemeEval e;
        e.name = h.substr(0, h.size() - 6);
        r.schemes.push_back(std::move(e));
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        const auto f = split(lines[i], ',');
        const std::string where = csv_path.string() + ":" + std::to_string(i + 1);
        if (f.size() != header.size()) throw DataError(where + ": wrong field count");
        r.ids.push_back(f[0]);
        r.truth.push_back(static_cast<int>(parse_int(f[1], where + ": truth")));
        r.glaucoma.push_back(static_cast<int>(parse_int(f[2], where + ": glaucoma")));
        r.ols_slopes.push_back(parse_double(f[3], where + ": ols_slope"));
        for (std::size_t k = 0; k < r.schemes.size(); ++k)
            r.schemes[k].scores.push_back(parse_double(f[4 + 2 * k], where + ": score"));
    }
    evaluate_schemes(r, ini.get_double("evaluate.target_specificity", 0.95), ini.get_double("evaluate.level", 0.95));
    return r;
}

void cmd_report(Session& s, const fs::path& eval_dir, const std::string& out) {
    require_dir(eval_dir, "--eval");
    std::string config_hash;
    if (out.empty()) {
        const auto r = rebuild_report(eval_dir, nullptr, config_hash);
        *s.out << report_markdown(r);
        return;
    }
    auto& m = s.open(out);
    const auto r = rebuild_report(eval_dir, &m, config_hash);
    m.config_hash = config_hash;
    write_report(r, out, config_hash);
    m.finish("ok");
    s.say("report: " + std::to_string(r.schemes.size()) + " schemes -> " + out);
}

std::string saliency_svg(const Observation& o, std::span<const double> sal, const std::string& id) {
    constexpr int W = 640, H = 480, L = 60, T = 50;
    const double cw = static_cast<double>(W - L - 20) / o.P;
    const double ch = std::min(60.0, static_cast<double>(H - T - 40) / o.tau);
    std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" viewBox=\"0 0 640 480\">\n";
    s += "<rect x=\"0\" y=\"0\" width=\"640\" height=\"480\" fill=\"white\"/>\n";
    s += "<text x=\"" + std::to_string(L) + "\" y=\"30\" font-family=\"sans-serif\" font-size=\"14\">saliency " + id +
         "</text>\n";
    for (std::uint32_t t = 0; t < o.tau; ++t) {
        const double y = T + t * ch;
        s += "<text x=\"10\" y=\"" + format_fixed(y + ch / 2 + 4, 2) + "\" font-family=\"sans-serif\" font-size=\"11\">t=" +
             format_fixed(o.times[t], 2) + "</text>\n";
        for (std::uint32_t p = 0; p < o.P; ++p) {
            const double v = std::clamp(sal[t * o.P + p], 0.0, 1.0);
            const int shade = static_cast<int>(std::lround(255.0 * (1.0 - v)));
            s += "<rect x=\"" + format_fixed(L + p * cw, 2) + "\" y=\"" + format_fixed(y, 2) + "\" width=\"" +
                 format_fixed(cw, 2) + "\" height=\"" + format_fixed(ch, 2) + "\" fill=\"rgb(255," +
                 std::to_string(shade) + "," + std::to_string(shade) + ")\"/>\n";
        }
    }
    s += "</svg>\n";
    return s;
}

void cmd_saliency(Session& s, const std::string& checkpoint_flag, const std::string& run_flag, const fs::path& data,
                  const std::string& partition, const std::string& id, std::optional<std::size_t> index,
                  const fs::path& out) {
    if (checkpoint_flag.empty() == run_flag.empty())
        throw ConfigError("saliency: give exactly one of --checkpoint and --run");
    fs::path ckpt(checkpoint_flag);
    if (!run_flag.empty()) {
        require_dir(run_flag, "--run");
        const auto rel = std::string(trim(read_file(fs::path(run_flag) / "selected.txt")));
        ckpt = fs::path(run_flag) / rel;
    }
    std::string file;
    if (partition == "train") file = "train.seqset";
    else if (partition == "validation") file = "validation.seqset";
    else if (partition == "test") file = "test.seqset";
    else throw ConfigError("--partition: expected train, validation or test");
    if (!id.empty() && index) throw ConfigError("saliency: give at most one of --id and --index");

    auto& m = s.open(out);
    m.input(ckpt);
    require_dir(data, "--data");
    m.input(data / file);
    const auto state = checkpoint_load(ckpt);
    m.config_hash = hash_text(state.config.canonical());
    m.seed = state.config.seed;
    const auto seqs = seqset_from_disk(data / file);
    std::size_t k = index.value_or(0);
    if (!id.empty()) {
        k = seqs.size();
        for (std::size_t i = 0; i < seqs.size(); ++i)
            if (obs_id(seqs[i].view) == id) k = i;
        if (k == seqs.size()) throw DataError((data / file).string() + ": no window with id '" + id + "'");
    }
    if (k >= seqs.size())
        throw DataError((data / file).string() + ": index " + std::to_string(k) + " out of range (" +
                        std::to_string(seqs.size()) + " windows)");
    const auto& o = seqs[k].view;
    const auto heads = state.config.score_heads();
    const auto sal = saliency(checkpoint_model(state), o, heads);
    std::string csv = "visit,time,point,value,saliency\n";
    for (std::uint32_t t = 0; t < o.tau; ++t)
        for (std::uint32_t p = 0; p < o.P; ++p)
            csv += std::to_string(t) + "," + format_double(o.times[t]) + "," + std::to_string(p) + "," +
                   format_double(o.x[t * o.P + p]) + "," + format_double(sal[t * o.P + p]) + "\n";
    write_file(out / "saliency.csv", csv);
    write_file(out / "saliency.svg", saliency_svg(o, sal, obs_id(o)));
    m.finish("ok");
    s.say("saliency: window " + obs_id(o) + " -> " + out.string());
}

int exit_code_of(const std::exception_ptr& ep, std::string& message) {
    try {
        std::rethrow_exception(ep);
    } catch (const ConfigError& e) {
        message = std::string("configuration error: ") + e.what();
        return 2;
    } catch (const DataError& e) {
        message = std::string("data error: ") + e.what();
        return 3;
    } catch (const NumericalError& e) {
        message = std::string("numerical failure: ") + e.what();
        return 4;
    } catch (const fs::filesystem_error& e) {
        message = std::string("data error: ") + e.what();
        return 3;
    } catch (const std::exception& e) {
        message = std::string("error: ") + e.what();
        return 1;
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Session s;
    s.out = &out;
    s.err = &err;
    for (std::size_t i = 0; i < args.size(); ++i) s.command_line += (i ? " " : "") + args[i];

    CLI::App app{"Weakly supervised progression detection laboratory", "weakprog"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", kToolVersion);
    std::uint64_t seed = 0;
    auto* seed_opt = app.add_option("--seed", seed, "Override every seed in the configuration");
    app.add_option("--threads", s.globals.threads, "Worker threads (simulation)")->check(CLI::Range(1u, 256u));
    app.add_flag("--quiet", s.globals.quiet, "Suppress progress output");
    app.add_option("--set", s.globals.overrides, "Configuration override key=value (repeatable)");

    std::string config, out_dir, cohort, scheme, data, run_dir, name, which, truth, checkpoint, partition = "test",
                                                                                            id, eval_dir;
    std::vector<std::string> runs;
    double target = 0.95;
    std::size_t index = 0;

    auto* sim = app.add_subcommand("simulate", "Generate a synthetic cohort");
    sim->add_option("--config", config, "Configuration file");
    sim->add_option("--out", out_dir, "Output directory")->required();

    auto* prep = app.add_subcommand("prepare", "Window, split and label a cohort");
    prep->add_option("--cohort", cohort, "Cohort file or simulate directory")->required();
    prep->add_option("--config", config, "Configuration file");
    prep->add_option("--scheme", scheme, "noisepu, regcon or plain")->required();
    prep->add_option("--out", out_dir, "Dataset directory")->required();

    auto* tr = app.add_subcommand("train", "Train a model on a prepared dataset");
    tr->add_option("--data", data, "Dataset directory")->required();
    tr->add_option("--config", config, "Configuration file");
    tr->add_option("--scheme", scheme, "Override train.scheme");
    tr->add_option("--name", name, "Name used in reports (default: scheme)");
    tr->add_option("--run", run_dir, "Run directory")->required();

    auto* base = app.add_subcommand("baseline", "Score the test partition with OLS or GPA");
    base->add_option("--data", data, "Dataset directory")->required();
    base->add_option("--which", which, "ols or gpa")->required();
    base->add_option("--config", config, "Configuration file");
    base->add_option("--name", name, "Name used in reports (default: method)");
    base->add_option("--run", run_dir, "Run directory")->required();

    auto* ev = app.add_subcommand("evaluate", "Compare runs at matched specificity");
    ev->add_option("--data", data, "Dataset directory")->required();
    ev->add_option("--runs", runs, "Run directories")->required();
    ev->add_option("--config", config, "Configuration file");
    auto* target_opt = ev->add_option("--target-specificity", target, "Target specificity");
    ev->add_option("--truth", truth, "simulator or gpa");
    ev->add_option("--out", out_dir, "Report directory")->required();

    auto* sal = app.add_subcommand("saliency", "Input saliency of one window");
    sal->add_option("--checkpoint", checkpoint, "Checkpoint file");
    sal->add_option("--run", run_dir, "Run directory (uses the selected checkpoint)");
    sal->add_option("--data", data, "Dataset directory")->required();
    sal->add_option("--partition", partition, "train, validation or test");
    sal->add_option("--id", id, "Window id subject/eye/window");
    auto* index_opt = sal->add_option("--index", index, "Window index within the partition");
    sal->add_option("--out", out_dir, "Output directory")->required();

    auto* rep = app.add_subcommand("report", "Re-render a report from an evaluation directory");
    rep->add_option("--eval", eval_dir, "Evaluation directory")->required();
    rep->add_option("--out", out_dir, "Output directory (default: markdown to stdout)");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }
    if (*seed_opt) s.globals.seed = seed;

    try {
        if (*sim) cmd_simulate(s, config, out_dir);
        else if (*prep) cmd_prepare(s, config, cohort, scheme, out_dir);
        else if (*tr) cmd_train(s, config, data, scheme, name, run_dir);
        else if (*base) cmd_baseline(s, config, data, which, name, run_dir);
        else if (*ev)
            cmd_evaluate(s, config, data, runs, *target_opt ? std::optional<double>(target) : std::nullopt, truth,
                         out_dir);
        else if (*sal)
            cmd_saliency(s, checkpoint, run_dir, data, partition, id,
                         *index_opt ? std::optional<std::size_t>(index) : std::nullopt, out_dir);
        else if (*rep) cmd_report(s, eval_dir, out_dir);
        return 0;
    } catch (...) {
        std::string message;
        const int code = exit_code_of(std::current_exception(), message);
        err << "weakprog: " << message << "\n";
        if (s.manifest) {
            try {
                s.manifest->finish("failed", message);
            } catch (...) {
                err << "weakprog: could not write the failure manifest\n";
            }
        }
        return code;
    }
}

}  // namespace weakprog::cli
