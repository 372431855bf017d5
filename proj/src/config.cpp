#include "dnr/config.hpp"

#include <numbers>

#include <json.hpp>

#include "dnr/io.hpp"

namespace dnr {

using nlohmann::json;

Geometry GeometryConfig::build() const {
    return Geometry::parallel(n, views, n, arc_degrees * std::numbers::pi / 180.0);
}

DatasetConfig RunConfig::dataset_config() const {
    DatasetConfig d;
    d.size = dataset_size;
    d.n = geometry.n;
    d.views = geometry.views;
    d.total_counts = total_counts;
    d.seed = dataset_seed;
    return d;
}

ObjectiveConfig RunConfig::operator_config() const {
    ObjectiveConfig o;
    o.eps_y = operator_eps;
    return o;
}

void RunConfig::validate() const {
    if (geometry.n < 2) throw ConfigError("geometry.n must be >= 2");
    if (geometry.views < 1) throw ConfigError("geometry.views must be >= 1");
    if (!(geometry.arc_degrees > 0.0 && geometry.arc_degrees <= 360.0))
        throw ConfigError("geometry.arc_degrees must lie in (0, 360]");
    if (!(total_counts > 0.0)) throw ConfigError("total_counts must be positive");
    limits.validate();
    osem.validate();
    butterworth.validate();
    network.validate();
    if (!(operator_eps > 0.0)) throw ConfigError("network.operator_eps must be positive");
    train.validate();
    if (dataset_size < 1) throw ConfigError("dataset.size must be >= 1");
    if (threads < 0) throw ConfigError("threads must be >= 0");
}

namespace {

// Reads known keys of one JSON object, rejecting anything else.
class Reader {
public:
    Reader(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
        if (!obj_.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    template <typename V>
    void get(const char* key, V& out) {
        seen_.push_back(key);
        auto it = obj_.find(key);
        if (it == obj_.end()) return;
        try {
            out = it->template get<V>();
        } catch (const json::exception&) {
            throw ConfigError(where_ + "." + key + ": wrong value type");
        }
    }

    void interval(const char* key, Interval& out) {
        seen_.push_back(key);
        auto it = obj_.find(key);
        if (it == obj_.end()) return;
        if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number() || !(*it)[1].is_number())
            throw ConfigError(where_ + "." + key + ": expected [lo, hi]");
        out.lo = (*it)[0].get<double>();
        out.hi = (*it)[1].get<double>();
    }

    const json* child(const char* key) {
        seen_.push_back(key);
        auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (auto it = obj_.begin(); it != obj_.end(); ++it) {
            bool known = false;
            for (const auto& k : seen_) known = known || k == it.key();
            if (!known) throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
        }
    }

private:
    const json& obj_;
    std::string where_;
    std::vector<std::string> seen_;
};

}  // namespace

RunConfig run_config_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig cfg;
    Reader root(doc, "config");
    if (const json* g = root.child("geometry")) {
        Reader r(*g, "geometry");
        r.get("n", cfg.geometry.n);
        r.get("views", cfg.geometry.views);
        r.get("arc_degrees", cfg.geometry.arc_degrees);
        r.finish();
    }
    root.get("total_counts", cfg.total_counts);
    if (const json* l = root.child("phantom_limits")) {
        Reader r(*l, "phantom_limits");
        std::vector<int> k{cfg.limits.k_min, cfg.limits.k_max};
        r.get("sources", k);
        if (k.size() != 2) throw ConfigError("phantom_limits.sources: expected [min, max]");
        cfg.limits.k_min = k[0];
        cfg.limits.k_max = k[1];
        r.interval("background", cfg.limits.background);
        r.interval("amplitude", cfg.limits.amplitude);
        r.get("center_radius", cfg.limits.center_radius);
        r.interval("semi_axes", cfg.limits.axes);
        r.interval("orientation", cfg.limits.phi);
        r.interval("diffusion", cfg.limits.diffusion);
        r.finish();
    }
    if (const json* o = root.child("osem")) {
        Reader r(*o, "osem");
        r.get("iterations", cfg.osem.iterations);
        r.get("subsets", cfg.osem.subsets);
        r.get("init_value", cfg.osem.init_value);
        r.get("eps", cfg.osem.eps);
        r.finish();
    }
    if (const json* b = root.child("butterworth")) {
        Reader r(*b, "butterworth");
        r.get("order", cfg.butterworth.order);
        r.get("cutoff", cfg.butterworth.cutoff);
        r.finish();
    }
    if (const json* n = root.child("network")) {
        Reader r(*n, "network");
        r.get("blocks", cfg.network.n_blocks);
        r.get("channels", cfg.network.channels);
        r.get("slope", cfg.network.slope);
        r.get("operator_eps", cfg.operator_eps);
        r.get("zero_init_updates", cfg.network.zero_init_updates);
        r.finish();
    }
    if (const json* t = root.child("train")) {
        Reader r(*t, "train");
        r.get("epochs", cfg.train.epochs);
        r.get("batch_size", cfg.train.batch_size);
        r.get("split", cfg.train.split);
        r.get("lr", cfg.train.lr);
        r.get("beta1", cfg.train.beta1);
        r.get("beta2", cfg.train.beta2);
        r.get("seed", cfg.train.seed);
        r.get("limit", cfg.train.limit);
        r.finish();
    }
    if (const json* d = root.child("dataset")) {
        Reader r(*d, "dataset");
        r.get("size", cfg.dataset_size);
        r.get("seed", cfg.dataset_seed);
        r.finish();
    }
    root.get("model_seed", cfg.model_seed);
    root.get("threads", cfg.threads);
    root.finish();
    cfg.validate();
    return cfg;
}

std::string run_config_to_json(const RunConfig& cfg) {
    const auto& l = cfg.limits;
    json doc = {
        {"geometry", {{"n", cfg.geometry.n}, {"views", cfg.geometry.views}, {"arc_degrees", cfg.geometry.arc_degrees}}},
        {"total_counts", cfg.total_counts},
        {"phantom_limits",
         {{"sources", {l.k_min, l.k_max}},
          {"background", {l.background.lo, l.background.hi}},
          {"amplitude", {l.amplitude.lo, l.amplitude.hi}},
          {"center_radius", l.center_radius},
          {"semi_axes", {l.axes.lo, l.axes.hi}},
          {"orientation", {l.phi.lo, l.phi.hi}},
          {"diffusion", {l.diffusion.lo, l.diffusion.hi}}}},
        {"osem",
         {{"iterations", cfg.osem.iterations},
          {"subsets", cfg.osem.subsets},
          {"init_value", cfg.osem.init_value},
          {"eps", cfg.osem.eps}}},
        {"butterworth", {{"order", cfg.butterworth.order}, {"cutoff", cfg.butterworth.cutoff}}},
        {"network", {{"blocks", cfg.network.n_blocks}, {"channels", cfg.network.channels}, {"slope", cfg.network.slope},
                     {"operator_eps", cfg.operator_eps},
                     {"zero_init_updates", cfg.network.zero_init_updates}}},
        {"train",
         {{"epochs", cfg.train.epochs},
          {"batch_size", cfg.train.batch_size},
          {"split", cfg.train.split},
          {"lr", cfg.train.lr},
          {"beta1", cfg.train.beta1},
          {"beta2", cfg.train.beta2},
          {"seed", cfg.train.seed},
          {"limit", cfg.train.limit}}},
        {"dataset", {{"size", cfg.dataset_size}, {"seed", cfg.dataset_seed}}},
        {"model_seed", cfg.model_seed},
        {"threads", cfg.threads}};
    return doc.dump(2) + "\n";
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = io::read_text(path);
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    return run_config_from_json(text);
}

}  // namespace dnr
