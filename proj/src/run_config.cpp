#include "mana/run_config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace mana {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

struct Entry {
    std::string value;
    std::size_t line;
};

[[noreturn]] void fail(std::size_t line, const std::string& key, const std::string& what)
{
    throw ConfigError("config line " + std::to_string(line) + ": " + key + ": " + what);
}

std::uint64_t to_u64(const std::string& key, const Entry& e)
{
    std::uint64_t v = 0;
    const char* end = e.value.data() + e.value.size();
    auto [ptr, ec] = std::from_chars(e.value.data(), end, v);
    if (ec != std::errc() || ptr != end) fail(e.line, key, "expected a non-negative integer, got '" + e.value + "'");
    return v;
}

std::size_t to_size(const std::string& key, const Entry& e)
{
    return static_cast<std::size_t>(to_u64(key, e));
}

double to_double(const std::string& key, const Entry& e)
{
    char* end = nullptr;
    const double v = std::strtod(e.value.c_str(), &end);
    if (e.value.empty() || end != e.value.c_str() + e.value.size() || !std::isfinite(v)) {
        fail(e.line, key, "expected a finite number, got '" + e.value + "'");
    }
    return v;
}

bool to_bool(const std::string& key, const Entry& e)
{
    if (e.value == "true" || e.value == "1") return true;
    if (e.value == "false" || e.value == "0") return false;
    fail(e.line, key, "expected true or false, got '" + e.value + "'");
}

template <typename F>
auto wrap_parse(const std::string& key, const Entry& e, F&& parse)
{
    try {
        return parse(e.value);
    } catch (const ConfigError& err) {
        fail(e.line, key, err.what());
    }
}

std::string format_double(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

RunConfig parse_run_config(const std::string& text)
{
    std::map<std::string, Entry> entries;
    std::istringstream in(text);
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        const std::string s = trim(raw);
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line) + ": expected key = value");
        const std::string key = trim(s.substr(0, eq));
        if (key.empty()) throw ConfigError("config line " + std::to_string(line) + ": missing key before '='");
        if (!entries.emplace(key, Entry{trim(s.substr(eq + 1)), line}).second) fail(line, key, "key given twice");
    }

    RunConfig cfg;
    if (auto it = entries.find("train.preset"); it != entries.end()) {
        if (it->second.value == "desk") cfg.schedule = TrainingSchedule::desk();
        else if (it->second.value == "paper") cfg.schedule = TrainingSchedule::paper();
        else fail(it->second.line, it->first, "expected desk or paper, got '" + it->second.value + "'");
        entries.erase(it);
    }

    using Setter = std::function<void(const std::string&, const Entry&)>;
    std::map<std::string, Setter> setters{
        {"seed", [&](auto& k, auto& e) { cfg.seed = to_u64(k, e); }},
        {"output.dir", [&](auto&, auto& e) { cfg.output_dir = e.value; }},
        {"model.C", [&](auto& k, auto& e) { cfg.model.channels = to_size(k, e); }},
        {"model.T", [&](auto& k, auto& e) { cfg.model.frames = to_size(k, e); }},
        {"model.N", [&](auto& k, auto& e) { cfg.model.memory_size = to_size(k, e); }},
        {"model.enc_blocks", [&](auto& k, auto& e) { cfg.model.enc_blocks = to_size(k, e); }},
        {"model.dec_blocks", [&](auto& k, auto& e) { cfg.model.dec_blocks = to_size(k, e); }},
        {"model.scale", [&](auto& k, auto& e) { cfg.model.scale = to_size(k, e); }},
        {"model.window", [&](auto& k, auto& e) { cfg.model.window = to_size(k, e); }},
        {"model.temporal_reduce",
         [&](auto& k, auto& e) { cfg.model.temporal_reduce = wrap_parse(k, e, parse_temporal_reduce); }},
        {"model.memory_enabled", [&](auto& k, auto& e) { cfg.model.memory_enabled = to_bool(k, e); }},
        {"model.memory_query", [&](auto& k, auto& e) { cfg.model.memory_query = wrap_parse(k, e, parse_memory_query); }},
        {"train.stage1_freeze_fy", [&](auto& k, auto& e) { cfg.schedule.stage1_freeze_fusion_y = to_bool(k, e); }},
        {"data.source",
         [&](auto& k, auto& e) {
             if (e.value == "synth") cfg.data.source = DataSource::synth;
             else if (e.value == "dir") cfg.data.source = DataSource::directory;
             else fail(e.line, k, "expected synth or dir, got '" + e.value + "'");
         }},
        {"data.pattern", [&](auto& k, auto& e) { cfg.data.pattern = wrap_parse(k, e, parse_pattern); }},
        {"data.hr_size", [&](auto& k, auto& e) { cfg.data.hr_size = to_size(k, e); }},
        {"data.motion_x", [&](auto& k, auto& e) { cfg.data.motion_x = to_double(k, e); }},
        {"data.motion_y", [&](auto& k, auto& e) { cfg.data.motion_y = to_double(k, e); }},
        {"data.clips", [&](auto& k, auto& e) { cfg.data.clips = to_size(k, e); }},
        {"data.heldout", [&](auto& k, auto& e) { cfg.data.heldout = to_size(k, e); }},
        {"data.lr_dir", [&](auto&, auto& e) { cfg.data.lr_dir = e.value; }},
        {"data.hr_dir", [&](auto&, auto& e) { cfg.data.hr_dir = e.value; }},
    };
    for (std::size_t s = 0; s < 3; ++s) {
        const std::string p = "train.stage" + std::to_string(s + 1);
        setters[p + ".iterations"] = [&cfg, s](auto& k, auto& e) { cfg.schedule.stages[s].iterations = to_size(k, e); };
        setters[p + ".lr"] = [&cfg, s](auto& k, auto& e) {
            const double lr = to_double(k, e);
            if (lr < 0) fail(e.line, k, "learning rate must be non-negative");
            cfg.schedule.stages[s].lr = lr;
        };
    }

    for (const auto& [key, entry] : entries) {
        auto it = setters.find(key);
        if (it == setters.end()) fail(entry.line, key, "unknown key");
        it->second(key, entry);
    }

    try {
        cfg.model.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (cfg.data.source == DataSource::synth) {
        if (cfg.data.clips == 0) throw ConfigError("config: data.clips must be at least 1");
        if (cfg.data.hr_size == 0 || cfg.data.hr_size % 4 != 0) {
            throw ConfigError("config: data.hr_size must be a positive multiple of 4");
        }
    } else if (cfg.data.lr_dir.empty() || cfg.data.hr_dir.empty()) {
        throw ConfigError("config: data.source = dir needs data.lr_dir and data.hr_dir");
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str());
}

std::string to_text(const RunConfig& cfg)
{
    std::ostringstream o;
    const auto& m = cfg.model;
    o << "seed = " << cfg.seed << "\n";
    o << "output.dir = " << cfg.output_dir.string() << "\n";
    o << "model.C = " << m.channels << "\n";
    o << "model.T = " << m.frames << "\n";
    o << "model.N = " << m.memory_size << "\n";
    o << "model.enc_blocks = " << m.enc_blocks << "\n";
    o << "model.dec_blocks = " << m.dec_blocks << "\n";
    o << "model.scale = " << m.scale << "\n";
    o << "model.window = " << m.window << "\n";
    o << "model.temporal_reduce = " << to_string(m.temporal_reduce) << "\n";
    o << "model.memory_enabled = " << (m.memory_enabled ? "true" : "false") << "\n";
    o << "model.memory_query = " << to_string(m.memory_query) << "\n";
    for (std::size_t s = 0; s < 3; ++s) {
        o << "train.stage" << s + 1 << ".iterations = " << cfg.schedule.stages[s].iterations << "\n";
        o << "train.stage" << s + 1 << ".lr = " << format_double(cfg.schedule.stages[s].lr) << "\n";
    }
    o << "train.stage1_freeze_fy = " << (cfg.schedule.stage1_freeze_fusion_y ? "true" : "false") << "\n";
    const auto& d = cfg.data;
    o << "data.source = " << (d.source == DataSource::synth ? "synth" : "dir") << "\n";
    o << "data.pattern = " << to_string(d.pattern) << "\n";
    o << "data.hr_size = " << d.hr_size << "\n";
    o << "data.motion_x = " << format_double(d.motion_x) << "\n";
    o << "data.motion_y = " << format_double(d.motion_y) << "\n";
    o << "data.clips = " << d.clips << "\n";
    o << "data.heldout = " << d.heldout << "\n";
    if (!d.lr_dir.empty()) o << "data.lr_dir = " << d.lr_dir.string() << "\n";
    if (!d.hr_dir.empty()) o << "data.hr_dir = " << d.hr_dir.string() << "\n";
    return o.str();
}

void apply_environment(RunConfig& cfg)
{
    const char* env = std::getenv("MANA_SEED");
    if (!env) return;
    std::uint64_t v = 0;
    const std::string text = env;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw ConfigError("MANA_SEED: expected a non-negative integer, got '" + text + "'");
    }
    cfg.seed = v;
}

} // namespace mana
