#include "config.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace cvar_reach::app {

using nlohmann::json;

namespace {

// Reads one JSON object, remembering which keys were consumed so that
// anything left over can be rejected.
class Section {
public:
    Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object())
            throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    bool has(const std::string& key) const { return node_.contains(key); }

    const json& required(const std::string& key) {
        if (!node_.contains(key))
            throw ConfigError(child(key), "missing required key");
        seen_.insert(key);
        return node_.at(key);
    }

    const json* optional(const std::string& key) {
        if (!node_.contains(key))
            return nullptr;
        seen_.insert(key);
        return &node_.at(key);
    }

    std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void reject_unknown() const {
        for (const auto& [key, _] : node_.items())
            if (!seen_.count(key))
                throw ConfigError(child(key), "unknown key");
    }

private:
    const json& node_;
    std::string path_;
    std::set<std::string> seen_;
};

double number(const json& v, const std::string& where) {
    if (!v.is_number())
        throw ConfigError(where, "expected a number");
    return v.get<double>();
}

std::uint64_t unsigned_integer(const json& v, const std::string& where) {
    if (!v.is_number_unsigned())
        throw ConfigError(where, "expected a nonnegative integer");
    return v.get<std::uint64_t>();
}

std::string text(const json& v, const std::string& where) {
    if (!v.is_string())
        throw ConfigError(where, "expected a string");
    return v.get<std::string>();
}

std::vector<double> numbers(const json& v, const std::string& where) {
    if (!v.is_array())
        throw ConfigError(where, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(number(v[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

void read_optional(Section& s, const std::string& key, double& target) {
    if (const json* v = s.optional(key))
        target = number(*v, s.child(key));
}

void parse_model(const json& node, RunConfig& cfg) {
    Section s(node, "model");
    if (const json* preset = s.optional("preset")) {
        cfg.model.preset = text(*preset, "model.preset");
        if (cfg.model.preset != "pond-v1")
            throw ConfigError("model.preset", "unknown preset '" + cfg.model.preset + "' (known: pond-v1)");
        const auto d = pond_v1_disturbance();
        cfg.model.values.assign(d.values().begin(), d.values().end());
        cfg.model.probs.assign(d.probs().begin(), d.probs().end());
        if (s.has("pond") || s.has("disturbance"))
            throw ConfigError("model", "give either 'preset' or inline 'pond' and 'disturbance', not both");
        s.reject_unknown();
        return;
    }
    cfg.model.preset.clear();
    Section pond(s.required("pond"), "model.pond");
    PondParams& p = cfg.model.pond;
    read_optional(pond, "surface_area", p.surface_area);
    read_optional(pond, "outlet_radius", p.outlet_radius);
    read_optional(pond, "discharge_coeff", p.discharge_coeff);
    read_optional(pond, "outlet_elevation", p.outlet_elevation);
    read_optional(pond, "gravity", p.gravity);
    read_optional(pond, "dt", p.dt);
    read_optional(pond, "state_max", p.state_max);
    pond.reject_unknown();
    Section dist(s.required("disturbance"), "model.disturbance");
    cfg.model.values = numbers(dist.required("values"), "model.disturbance.values");
    cfg.model.probs = numbers(dist.required("probs"), "model.disturbance.probs");
    dist.reject_unknown();
    if (cfg.model.values.size() != cfg.model.probs.size() || cfg.model.values.empty())
        throw ConfigError("model.disturbance", "values and probs must be nonempty and of equal length");
    s.reject_unknown();
}

void parse_grid(const json& node, RunConfig& cfg) {
    Section s(node, "grid");
    const json& states = s.required("states");
    if (states.is_array()) {
        cfg.states = StateSpec{};
        cfg.states.points = numbers(states, "grid.states");
    } else {
        Section r(states, "grid.states");
        cfg.states = StateSpec{};
        cfg.states.min = number(r.required("min"), "grid.states.min");
        cfg.states.max = number(r.required("max"), "grid.states.max");
        cfg.states.step = number(r.required("step"), "grid.states.step");
        r.reject_unknown();
    }
    cfg.confidence = numbers(s.required("confidence"), "grid.confidence");
    s.reject_unknown();
}

void parse_cost(const json& node, RunConfig& cfg) {
    Section s(node, "cost");
    cfg.cost.beta = number(s.required("beta"), "cost.beta");
    cfg.cost.m = number(s.required("m"), "cost.m");
    cfg.cost.c_max = number(s.required("c_max"), "cost.c_max");
    if (const json* v = s.optional("surface")) {
        cfg.cost.surface = text(*v, "cost.surface");
        if (cfg.cost.surface != "linear" && cfg.cost.surface != "indicator")
            throw ConfigError("cost.surface", "expected 'linear' or 'indicator'");
    }
    s.reject_unknown();
}

void parse_mc(const json& node, RunConfig& cfg) {
    Section s(node, "mc");
    McConfig& mc = cfg.mc;
    mc.samples = unsigned_integer(s.required("samples"), "mc.samples");
    mc.seed = unsigned_integer(s.required("seed"), "mc.seed");
    read_optional(s, "sigma_W0", mc.sigma_w0);
    read_optional(s, "sigma_J0", mc.sigma_j0);
    if (const json* v = s.optional("bootstrap"))
        mc.bootstrap = unsigned_integer(*v, "mc.bootstrap");
    if (const json* v = s.optional("policy")) {
        Section p(*v, "mc.policy");
        mc.policy.kind = text(p.required("kind"), "mc.policy.kind");
        if (mc.policy.kind == "fixed")
            mc.policy.control = number(p.required("control"), "mc.policy.control");
        else if (mc.policy.kind != "table")
            throw ConfigError("mc.policy.kind", "expected 'fixed' or 'table'");
        p.reject_unknown();
    }
    if (mc.samples < 1)
        throw ConfigError("mc.samples", "must be at least 1");
    if (mc.sigma_w0 < 0.0 || mc.sigma_j0 < 0.0)
        throw ConfigError("mc", "jitter sigmas must be nonnegative");
    s.reject_unknown();
}

void parse_sets(const json& node, RunConfig& cfg) {
    Section s(node, "sets");
    cfg.sets.alphas = numbers(s.required("alphas"), "sets.alphas");
    cfg.sets.risks = numbers(s.required("risks"), "sets.risks");
    read_optional(s, "margin_sigmas", cfg.sets.margin_sigmas);
    if (const json* v = s.optional("special_case_epsilons"))
        cfg.sets.special_case_epsilons = numbers(*v, "sets.special_case_epsilons");
    for (double a : cfg.sets.alphas)
        if (!(a > 0.0) || a > 1.0)
            throw ConfigError("sets.alphas", "every alpha must lie in (0, 1]");
    s.reject_unknown();
}

std::string line_of(const std::string& text_, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < std::min(byte, text_.size()); ++i) {
        if (text_[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

json to_json(const RunConfig& cfg) {
    json j;
    j["schema_version"] = cfg.schema_version;
    if (!cfg.model.preset.empty()) {
        j["model"] = {{"preset", cfg.model.preset}};
    } else {
        const PondParams& p = cfg.model.pond;
        j["model"] = {{"pond",
                       {{"surface_area", p.surface_area},
                        {"outlet_radius", p.outlet_radius},
                        {"discharge_coeff", p.discharge_coeff},
                        {"outlet_elevation", p.outlet_elevation},
                        {"gravity", p.gravity},
                        {"dt", p.dt},
                        {"state_max", p.state_max}}},
                      {"disturbance", {{"values", cfg.model.values}, {"probs", cfg.model.probs}}}};
    }
    if (cfg.states.points.empty())
        j["grid"]["states"] = {{"min", *cfg.states.min}, {"max", *cfg.states.max}, {"step", *cfg.states.step}};
    else
        j["grid"]["states"] = cfg.states.points;
    j["grid"]["confidence"] = cfg.confidence;
    j["cost"] = {{"beta", cfg.cost.beta}, {"m", cfg.cost.m}, {"c_max", cfg.cost.c_max}, {"surface", cfg.cost.surface}};
    j["horizon"] = cfg.horizon;
    json policy = {{"kind", cfg.mc.policy.kind}};
    if (cfg.mc.policy.kind == "fixed")
        policy["control"] = cfg.mc.policy.control;
    j["mc"] = {{"samples", cfg.mc.samples}, {"seed", cfg.mc.seed},         {"sigma_W0", cfg.mc.sigma_w0},
               {"sigma_J0", cfg.mc.sigma_j0}, {"bootstrap", cfg.mc.bootstrap}, {"policy", policy}};
    j["sets"] = {{"alphas", cfg.sets.alphas},
                 {"risks", cfg.sets.risks},
                 {"margin_sigmas", cfg.sets.margin_sigmas},
                 {"special_case_epsilons", cfg.sets.special_case_epsilons}};
    if (!cfg.output_dir.empty())
        j["output"] = {{"dir", cfg.output_dir}};
    return j;
}

} // namespace

RunConfig parse_config_text(const std::string& source_text, const std::string& source) {
    json root;
    try {
        root = json::parse(source_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(source + ", " + line_of(source_text, e.byte), "malformed JSON");
    }
    RunConfig cfg;
    Section s(root, "");
    const auto version = unsigned_integer(s.required("schema_version"), "schema_version");
    if (version != kSchemaVersion)
        throw ConfigError("schema_version", "unsupported version " + std::to_string(version) + " (expected " +
                                                std::to_string(kSchemaVersion) + ")");
    parse_model(s.required("model"), cfg);
    parse_grid(s.required("grid"), cfg);
    parse_cost(s.required("cost"), cfg);
    const auto horizon = unsigned_integer(s.required("horizon"), "horizon");
    cfg.horizon = static_cast<int>(horizon);
    parse_mc(s.required("mc"), cfg);
    parse_sets(s.required("sets"), cfg);
    if (const json* out = s.optional("output")) {
        Section o(*out, "output");
        cfg.output_dir = text(o.required("dir"), "output.dir");
        o.reject_unknown();
    }
    s.reject_unknown();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError(path.string(), "cannot open config file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path.string());
}

RunConfig default_config() {
    RunConfig cfg;
    cfg.model.preset = "pond-v1";
    const auto d = pond_v1_disturbance();
    cfg.model.values.assign(d.values().begin(), d.values().end());
    cfg.model.probs.assign(d.probs().begin(), d.probs().end());
    cfg.states.min = 0.0;
    cfg.states.max = 6.5;
    cfg.states.step = 0.1;
    cfg.confidence = AugmentedGrid::pond_confidence_levels();
    std::sort(cfg.confidence.begin(), cfg.confidence.end(), std::greater<>());
    cfg.sets.alphas = cfg.confidence;
    cfg.sets.risks = {-0.5, -0.25, 0.0, 0.25, 0.5, 1.0, 1.5};
    return cfg;
}

std::string canonical_json(const RunConfig& cfg) { return to_json(cfg).dump(); }

SystemModel build_model(const RunConfig& cfg) {
    try {
        cfg.model.pond.validate();
        DisturbanceDistribution d(cfg.model.values, cfg.model.probs);
        return make_pond_model(cfg.model.pond, std::move(d));
    } catch (const std::invalid_argument& e) {
        throw ConfigError("model", e.what());
    }
}

std::shared_ptr<const AugmentedGrid> build_grid(const RunConfig& cfg) {
    try {
        std::vector<double> states = cfg.states.points;
        if (states.empty()) {
            if (!(*cfg.states.step > 0.0) || *cfg.states.max <= *cfg.states.min)
                throw std::invalid_argument("need min < max and step > 0");
            states = AugmentedGrid::uniform_states(*cfg.states.min, *cfg.states.max, *cfg.states.step);
        }
        return std::make_shared<const AugmentedGrid>(std::move(states), cfg.confidence);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("grid", e.what());
    }
}

StageCostSpec build_cost(const RunConfig& cfg) {
    StageCostSpec spec;
    spec.beta = cfg.cost.beta;
    spec.m = cfg.cost.m;
    spec.surface = cfg.cost.surface == "indicator" ? SurfaceFunction::indicator(cfg.cost.c_max)
                                                   : SurfaceFunction::linear_offset(cfg.cost.c_max);
    try {
        spec.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("cost", e.what());
    }
    return spec;
}

std::string solve_hash(const RunConfig& cfg) {
    const json j = to_json(cfg);
    const json part = {{"schema_version", j["schema_version"]}, {"model", j["model"]}, {"grid", j["grid"]},
                       {"cost", j["cost"]},                     {"horizon", j["horizon"]}};
    return sha256_hex(part.dump());
}

std::string mc_hash(const RunConfig& cfg) {
    const json j = to_json(cfg);
    json part = {{"schema_version", j["schema_version"]},
                 {"model", j["model"]},
                 {"states", j["grid"]["states"]},
                 {"cost", j["cost"]},
                 {"horizon", j["horizon"]},
                 {"mc", j["mc"]},
                 {"alphas", j["sets"]["alphas"]}};
    // a table policy is only as current as the solve it replays
    if (cfg.mc.policy.kind == "table")
        part["solve"] = solve_hash(cfg);
    return sha256_hex(part.dump());
}

namespace {

std::string hex(const unsigned char* digest, unsigned int len) {
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i)
        os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    return os.str();
}

struct Digest {
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    Digest() {
        if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1)
            throw std::runtime_error("sha256: digest initialization failed");
    }
    ~Digest() { EVP_MD_CTX_free(ctx); }
    void update(const void* data, std::size_t n) {
        if (EVP_DigestUpdate(ctx, data, n) != 1)
            throw std::runtime_error("sha256: digest update failed");
    }
    std::string finish() {
        unsigned char out[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx, out, &len) != 1)
            throw std::runtime_error("sha256: digest finalization failed");
        return hex(out, len);
    }
};

} // namespace

std::string sha256_hex(const std::string& bytes) {
    Digest d;
    d.update(bytes.data(), bytes.size());
    return d.finish();
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot read " + path.string());
    Digest d;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        d.update(buf, static_cast<std::size_t>(in.gcount()));
    }
    return d.finish();
}

} // namespace cvar_reach::app
