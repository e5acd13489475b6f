#include <map>
#include <span>
#include <sstream>

#include "weakprog/error.hpp"
#include "weakprog/textio.hpp"
#include "weakprog/training.hpp"

namespace weakprog {

namespace {

constexpr const char* kFormat = "ckpt/1";

std::string hex_list(std::span<const double> v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format_hex(v[i]);
    }
    return out;
}

std::vector<double> parse_list(std::string_view s, const std::string& what) {
    std::vector<double> out;
    if (trim(s).empty()) return out;
    for (const auto& part : split(s, ',')) out.push_back(parse_double(part, what));
    return out;
}

std::string shape_string(const std::vector<std::size_t>& shape) {
    std::string out;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += 'x';
        out += std::to_string(shape[i]);
    }
    return out;
}

void write_params(std::string& out, const ModelParams& p) {
    out += "mean " + hex_list(p.input_mean) + "\n";
    out += "sd " + hex_list(p.input_sd) + "\n";
    for (const auto& t : p.tensors) out += "tensor " + t.name + " " + shape_string(t.shape) + " " + hex_list(t.data) + "\n";
}

/// Splits "key rest-of-line".
std::pair<std::string, std::string> head_rest(const std::string& line) {
    const auto sp = line.find(' ');
    if (sp == std::string::npos) return {line, ""};
    return {line.substr(0, sp), line.substr(sp + 1)};
}

void read_params(const std::vector<std::string>& lines, ModelParams& p, const std::string& where) {
    std::map<std::string, bool> seen;
    for (const auto& line : lines) {
        auto [key, rest] = head_rest(line);
        if (key == "mean") {
            p.input_mean = parse_list(rest, where + " mean");
        } else if (key == "sd") {
            p.input_sd = parse_list(rest, where + " sd");
        } else if (key == "tensor") {
            const auto fields = split(rest, ' ');
            if (fields.size() != 3) throw DataError(where + ": malformed tensor record");
            Tensor& t = p.get(fields[0]);
            if (shape_string(t.shape) != fields[1])
                throw DataError(where + ": tensor '" + fields[0] + "' has shape " + fields[1] + ", expected " +
                                shape_string(t.shape));
            auto data = parse_list(fields[2], where + " tensor " + fields[0]);
            if (data.size() != t.data.size()) throw DataError(where + ": tensor '" + fields[0] + "' size mismatch");
            t.data.assign(data.begin(), data.end());
            seen[fields[0]] = true;
        } else {
            throw DataError(where + ": unexpected record '" + key + "'");
        }
    }
    for (const auto& t : p.tensors)
        if (!seen.count(t.name)) throw DataError(where + ": missing tensor '" + t.name + "'");
    if (p.input_mean.size() != p.config.P || p.input_sd.size() != p.config.P)
        throw DataError(where + ": standardizer length mismatch");
}

}  // namespace

std::string checkpoint_to_string(const TrainState& st) {
    std::string body = std::string("format ") + kFormat + "\n[config]\n";
    body += st.config.canonical();
    body += "[state]\n";
    body += "next_epoch " + std::to_string(st.next_epoch) + "\n";
    body += "best_val_loss " + format_hex(st.best_val_loss) + "\n";
    body += "best_selection " + format_hex(st.best_selection) + "\n";
    body += "selected_epoch " + std::to_string(st.history.selected_epoch) + "\n";
    body += "opt_step " + std::to_string(st.opt.step) + "\n";
    body += "opt_lr " + format_hex(st.opt.lr) + "\n";
    body += "rng " + st.rng_state + "\n";
    body += "[params]\n";
    write_params(body, st.params);
    body += "[velocity]\n";
    for (std::size_t i = 0; i < st.params.tensors.size(); ++i)
        body += "velocity " + st.params.tensors[i].name + " " + hex_list(st.opt.velocity[i]) + "\n";
    body += "[selected]\n";
    write_params(body, st.selected);
    body += "[history]\n";
    for (const auto& r : st.history.epochs) {
        body += "epoch " + std::to_string(r.epoch) + " " + format_hex(r.train_loss) + " " + format_hex(r.val_loss) +
                " " + format_hex(r.val_accuracy) + " " + format_hex(r.val_sensitivity) + " " +
                format_hex(r.val_specificity) + " " + format_hex(r.lr) + " " + (r.improved ? "1" : "0") + "\n";
    }
    return body + "[checksum]\nbody fnv1a64 " + hex64(fnv1a64(body)) + "\n";
}

TrainState checkpoint_from_string(const std::string& text, const std::string& origin) {
    const auto mark = text.rfind("[checksum]\n");
    if (mark == std::string::npos) throw DataError(origin + ": checkpoint has no checksum trailer");
    const std::string body = text.substr(0, mark);
    const std::string trailer(trim(std::string_view(text).substr(mark + 11)));
    if (trailer != "body fnv1a64 " + hex64(fnv1a64(body)))
        throw DataError(origin + ": checkpoint checksum mismatch (file corrupted)");

    std::map<std::string, std::vector<std::string>> sections;
    std::string current;
    bool first = true;
    for (const auto& raw : split(body, '\n')) {
        if (raw.empty()) continue;
        if (first) {
            if (raw != std::string("format ") + kFormat)
                throw DataError(origin + ": unsupported checkpoint version '" + raw + "'");
            first = false;
            continue;
        }
        if (raw.front() == '[' && raw.back() == ']') {
            current = raw.substr(1, raw.size() - 2);
            sections[current];
            continue;
        }
        if (current.empty()) throw DataError(origin + ": record outside any section");
        sections[current].push_back(raw);
    }
    for (const char* s : {"config", "state", "params", "velocity", "selected", "history"})
        if (!sections.count(s)) throw DataError(origin + ": missing section [" + std::string(s) + "]");

    std::string cfg_text;
    for (const auto& l : sections["config"]) cfg_text += l + "\n";
    TrainState st;
    try {
        st.config = TrainConfig::from_kv(KvConfig::parse(cfg_text, origin));
    } catch (const ConfigError& e) {
        throw DataError(origin + ": invalid embedded configuration: " + e.what());
    }
    st.params = init_params(st.config.effective_model());
    st.selected = st.params;
    st.opt = init_opt_state(st.params);

    std::map<std::string, std::string> state;
    for (const auto& l : sections["state"]) {
        auto [k, v] = head_rest(l);
        state[k] = v;
    }
    for (const char* k : {"next_epoch", "best_val_loss", "best_selection", "selected_epoch", "opt_step", "opt_lr", "rng"})
        if (!state.count(k)) throw DataError(origin + ": missing state field '" + std::string(k) + "'");
    st.next_epoch = static_cast<std::uint32_t>(parse_u64(state["next_epoch"], "next_epoch"));
    st.best_val_loss = parse_double(state["best_val_loss"], "best_val_loss");
    st.best_selection = parse_double(state["best_selection"], "best_selection");
    st.history.selected_epoch = static_cast<int>(parse_int(state["selected_epoch"], "selected_epoch"));
    st.opt.step = parse_u64(state["opt_step"], "opt_step");
    st.opt.lr = parse_double(state["opt_lr"], "opt_lr");
    st.rng_state = state["rng"];

    read_params(sections["params"], st.params, origin + " [params]");
    read_params(sections["selected"], st.selected, origin + " [selected]");
    std::map<std::string, bool> seen;
    for (const auto& l : sections["velocity"]) {
        const auto f = split(l, ' ');
        if (f.size() != 3 || f[0] != "velocity") throw DataError(origin + ": malformed velocity record");
        const auto idx = st.params.index_of(f[1]);
        auto v = parse_list(f[2], "velocity " + f[1]);
        if (v.size() != st.params.tensors[idx].data.size())
            throw DataError(origin + ": velocity '" + f[1] + "' size mismatch");
        st.opt.velocity[idx] = std::move(v);
        seen[f[1]] = true;
    }
    if (seen.size() != st.params.tensors.size()) throw DataError(origin + ": incomplete velocity section");
    for (const auto& l : sections["history"]) {
        const auto f = split(l, ' ');
        if (f.size() != 9 || f[0] != "epoch") throw DataError(origin + ": malformed history record");
        EpochRecord r;
        r.epoch = static_cast<std::uint32_t>(parse_u64(f[1], "epoch"));
        r.train_loss = parse_double(f[2], "train_loss");
        r.val_loss = parse_double(f[3], "val_loss");
        r.val_accuracy = parse_double(f[4], "val_accuracy");
        r.val_sensitivity = parse_double(f[5], "val_sensitivity");
        r.val_specificity = parse_double(f[6], "val_specificity");
        r.lr = parse_double(f[7], "lr");
        r.improved = f[8] == "1";
        st.history.epochs.push_back(r);
    }
    if (st.history.epochs.size() != st.next_epoch) throw DataError(origin + ": history length does not match epoch counter");
    return st;
}

void checkpoint_save(const TrainState& state, const std::filesystem::path& path) {
    write_file(path, checkpoint_to_string(state));
}

TrainState checkpoint_load(const std::filesystem::path& path) {
    return checkpoint_from_string(read_file(path), path.string());
}

ModelParams checkpoint_model(const TrainState& state) {
    return state.history.selected_epoch >= 0 ? state.selected : state.params;
}

}  // namespace weakprog
