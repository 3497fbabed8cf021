#include "melodit/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace melodit {

std::string to_hex(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

namespace {

// key -> default value. The schema doubles as the unknown-key filter.
const std::map<std::string, std::string>& default_table() {
    static const std::map<std::string, std::string> table = {
        {"run.name", "run"},
        {"run.seed", "0"},

        {"data.sample_rate", "16000"},
        {"data.clip_seconds", "2.0"},
        {"data.count", "32"},
        {"data.min_midi", "60"},
        {"data.max_midi", "83"},

        {"codec.patch", "64"},

        {"cqt.hop", "64"},
        {"cqt.cutoff_hz", "261.6255653005986"},
        {"cqt.k", "4"},
        {"cqt.silence_rel", "1e-6"},

        {"melody.embed_dim", "16"},
        {"melody.hidden", "128"},
        {"melody.conv_kernels", "5,5,5"},
        {"melody.conv_strides", "1,1,1"},

        {"cond.text_drop_prob", "0.1"},
        {"cond.vocab_file", ""},

        {"trunk.blocks", "8"},
        {"trunk.d_model", "128"},
        {"trunk.heads", "4"},
        {"trunk.ffn_mult", "4"},
        {"trunk.max_len", "1024"},

        {"control.n_blocks", "4"},
        {"control.variant", "additive"},

        {"train.lr", "5e-5"},
        {"train.gamma", "10000"},
        {"train.batch", "4"},
        {"train.steps", "3000"},
        {"train.weight_decay", "1e-4"},
        {"train.latent_scale", "auto"},
        {"train.ckpt_every", "500"},
        {"train.freeze", "trunk,cond"},

        {"mask.enabled", "true"},
        {"mask.warm_frac", "0.1"},
        {"mask.weights_phase1", "0.4,0.3,0.15,0.1,0.05"},
        {"mask.weights_phase2", "0.25,0.25,0.2,0.15,0.15"},
        {"mask.weights_phase3", "0.15,0.15,0.2,0.2,0.3"},
        {"mask.frame_mask_prob", "0.1"},
        {"mask.span_mean_s", "0.25"},

        {"sample.steps", "250"},
        {"sample.cfg_scale", "7"},
        {"sample.method", "dpmpp2m"},
    };
    return table;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

RunConfig RunConfig::defaults() {
    RunConfig c;
    c.kv_ = default_table();
    return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path);
    RunConfig c = defaults();
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        lineno++;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw DataError("config " + path + ":" + std::to_string(lineno) + ": expected key = value");
        c.set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
    }
    return c;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (!default_table().count(key)) throw UsageError("unknown config key: " + key);
    kv_[key] = value;
}

void RunConfig::apply_override(const std::string& assignment) {
    size_t eq = assignment.find('=');
    if (eq == std::string::npos) throw UsageError("override must be key=value: " + assignment);
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

bool RunConfig::has(const std::string& key) const { return kv_.count(key) > 0; }

const std::string& RunConfig::get(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw UsageError("unknown config key: " + key);
    return it->second;
}

double RunConfig::get_double(const std::string& key) const {
    const std::string& v = get(key);
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw UsageError("config " + key + ": not a number: " + v);
    return d;
}

int RunConfig::get_int(const std::string& key) const {
    return static_cast<int>(get_long(key));
}

long RunConfig::get_long(const std::string& key) const {
    const std::string& v = get(key);
    size_t pos = 0;
    long d = std::stol(v, &pos);
    if (pos != v.size()) throw UsageError("config " + key + ": not an integer: " + v);
    return d;
}

bool RunConfig::get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw UsageError("config " + key + ": not a bool: " + v);
}

std::vector<std::string> RunConfig::get_list(const std::string& key) const {
    std::vector<std::string> out;
    std::stringstream ss(get(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<int> RunConfig::get_int_list(const std::string& key) const {
    std::vector<int> out;
    for (const auto& s : get_list(key)) out.push_back(std::stoi(s));
    return out;
}

std::vector<double> RunConfig::get_double_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& s : get_list(key)) out.push_back(std::stod(s));
    return out;
}

std::string RunConfig::canonical_text() const {
    std::string out;
    for (const auto& [k, v] : kv_) {  // std::map iterates sorted
        out += k;
        out += "=";
        out += v;
        out += "\n";
    }
    return out;
}

std::string RunConfig::digest() const { return to_hex(fnv1a64(canonical_text())); }

void RunConfig::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write config: " + path);
    out << canonical_text();
}

}  // namespace melodit
