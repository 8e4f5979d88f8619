#include "wsgat/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "wsgat/errors.hpp"
#include "wsgat/graph.hpp"

namespace wsgat {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::size_t to_count(const std::string& key, const std::string& v) {
    std::size_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        throw ConfigError("config key '" + key + "': '" + v + "' is not a non-negative integer");
    return out;
}

double to_real(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config key '" + key + "': '" + v + "' is not a boolean");
}

std::vector<std::size_t> to_count_list(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    if (v.empty() || v == "none") return out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_count(key, trim(item)));
    return out;
}

std::string join(const std::vector<std::size_t>& xs) {
    if (xs.empty()) return "none";
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
    return s;
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"layers", [](RunConfig& c, auto& k, auto& v) { c.layers = to_count(k, v); }},
        {"hidden", [](RunConfig& c, auto& k, auto& v) { c.hidden = to_count(k, v); }},
        {"heads", [](RunConfig& c, auto& k, auto& v) { c.heads = to_count(k, v); }},
        {"head_merge", [](RunConfig& c, auto&, auto& v) { c.head_merge = v; }},
        {"attention_hidden",
         [](RunConfig& c, auto& k, auto& v) { c.attention_hidden = to_count_list(k, v); }},
        {"attention_input", [](RunConfig& c, auto&, auto& v) { c.attention_input = v; }},
        {"activation", [](RunConfig& c, auto&, auto& v) { c.activation = v; }},
        {"projection", [](RunConfig& c, auto& k, auto& v) { c.projection = to_bool(k, v); }},
        {"self_loop_weight",
         [](RunConfig& c, auto& k, auto& v) { c.self_loop_weight = to_real(k, v); }},
        {"head_layers", [](RunConfig& c, auto& k, auto& v) { c.head_layers = to_count(k, v); }},
        {"head_hidden", [](RunConfig& c, auto& k, auto& v) { c.head_hidden = to_count(k, v); }},
        {"lr", [](RunConfig& c, auto& k, auto& v) { c.lr = to_real(k, v); }},
        {"epochs", [](RunConfig& c, auto& k, auto& v) { c.epochs = to_count(k, v); }},
        {"patience", [](RunConfig& c, auto& k, auto& v) { c.patience = to_count(k, v); }},
        {"lambda_weight", [](RunConfig& c, auto& k, auto& v) { c.lambda_weight = to_real(k, v); }},
        {"train_fraction",
         [](RunConfig& c, auto& k, auto& v) { c.train_fraction = to_real(k, v); }},
        {"val_fraction", [](RunConfig& c, auto& k, auto& v) { c.val_fraction = to_real(k, v); }},
        {"features", [](RunConfig& c, auto&, auto& v) { c.features = v; }},
        {"sse_dim", [](RunConfig& c, auto& k, auto& v) { c.sse_dim = to_count(k, v); }},
        {"sse_iters", [](RunConfig& c, auto& k, auto& v) { c.sse_iters = to_count(k, v); }},
        {"sse_tol", [](RunConfig& c, auto& k, auto& v) { c.sse_tol = to_real(k, v); }},
        {"feature_dim", [](RunConfig& c, auto& k, auto& v) { c.feature_dim = to_count(k, v); }},
    };
    return table;
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text, const std::string& source) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = source + ":" + std::to_string(line_no) + ": ";
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = setters().find(key);
        if (it == setters().end()) throw ConfigError(where + "unknown config key '" + key + "'");
        try {
            it->second(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

std::string RunConfig::to_text() const {
    std::ostringstream out;
    auto real = [](double v) { return graph::format_weight(v); };
    out << "layers = " << layers << '\n'
        << "hidden = " << hidden << '\n'
        << "heads = " << heads << '\n'
        << "head_merge = " << head_merge << '\n'
        << "attention_hidden = " << join(attention_hidden) << '\n'
        << "attention_input = " << attention_input << '\n'
        << "activation = " << activation << '\n'
        << "projection = " << (projection ? "true" : "false") << '\n'
        << "self_loop_weight = " << real(self_loop_weight) << '\n'
        << "head_layers = " << head_layers << '\n'
        << "head_hidden = " << head_hidden << '\n'
        << "lr = " << real(lr) << '\n'
        << "epochs = " << epochs << '\n'
        << "patience = " << patience << '\n'
        << "lambda_weight = " << real(lambda_weight) << '\n'
        << "train_fraction = " << real(train_fraction) << '\n'
        << "val_fraction = " << real(val_fraction) << '\n'
        << "features = " << features << '\n'
        << "sse_dim = " << sse_dim << '\n'
        << "sse_iters = " << sse_iters << '\n'
        << "sse_tol = " << real(sse_tol) << '\n'
        << "feature_dim = " << feature_dim << '\n';
    return out.str();
}

std::string RunConfig::digest() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : to_text()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void RunConfig::validate() const {
    if (head_merge != "concat" && head_merge != "mean")
        throw ConfigError("head_merge must be concat or mean");
    if (attention_input != "concat" && attention_input != "factored")
        throw ConfigError("attention_input must be concat or factored");
    if (heads == 0) throw ConfigError("heads must be >= 1");
    if (projection && hidden == 0) throw ConfigError("hidden must be >= 1");
    if (head_layers == 0) throw ConfigError("head_layers must be >= 1");
    if (head_layers > 1 && head_hidden == 0) throw ConfigError("head_hidden must be >= 1");
    if (!(lr > 0)) throw ConfigError("lr must be > 0");
    if (!(train_fraction > 0 && train_fraction < 1)) throw ConfigError("train_fraction must lie in (0, 1)");
    if (!(val_fraction >= 0 && val_fraction < 1)) throw ConfigError("val_fraction must lie in [0, 1)");
    if (features != "auto" && features != "sse" && features != "degree_onehot_log" &&
        features != "random_normal")
        throw ConfigError("features must be auto, sse, degree_onehot_log or random_normal");
    if (sse_dim == 0 || feature_dim == 0) throw ConfigError("feature dimensions must be >= 1");
}

}  // namespace wsgat
