#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "concept_monitor/errors.hpp"
#include "concept_monitor/report.hpp"

namespace concept_monitor::report {
namespace {

void dump(const Json& j, std::string& out, int indent) {
    switch (j.type()) {
        case Json::value_t::object: {
            if (j.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out += ",\n";
                first = false;
                out.append(static_cast<std::size_t>(indent + 2), ' ');
                out += Json(it.key()).dump();
                out += ": ";
                dump(it.value(), out, indent + 2);
            }
            out += '\n';
            out.append(static_cast<std::size_t>(indent), ' ');
            out += '}';
            return;
        }
        case Json::value_t::array: {
            bool scalars = true;
            for (const auto& v : j) scalars = scalars && !v.is_structured();
            if (j.empty() || scalars) {
                out += '[';
                for (std::size_t i = 0; i < j.size(); ++i) {
                    if (i) out += ", ";
                    dump(j[i], out, indent);
                }
                out += ']';
                return;
            }
            out += "[\n";
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i) out += ",\n";
                out.append(static_cast<std::size_t>(indent + 2), ' ');
                dump(j[i], out, indent + 2);
            }
            out += '\n';
            out.append(static_cast<std::size_t>(indent), ' ');
            out += ']';
            return;
        }
        case Json::value_t::number_float:
            out += format_number(j.get<double>());
            return;
        default:
            out += j.dump();
    }
}

const Json& need(const Json& obj, const char* key, const std::string& where) {
    if (!obj.is_object()) throw InputError("snapshot: '" + where + "' is not an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw InputError("snapshot: missing field '" + where + (where.empty() ? "" : ".") + key + "'");
    return *it;
}

template <class T>
T get_as(const Json& obj, const char* key, const std::string& where) {
    const Json& v = need(obj, key, where);
    try {
        return v.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw InputError("snapshot: field '" + where + (where.empty() ? "" : ".") + key + "' has the wrong type");
    }
}

Json pair(const std::array<double, 2>& p) { return Json::array({p[0], p[1]}); }

std::array<double, 2> read_pair(const Json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw InputError("snapshot: '" + where + "' must be a pair of numbers");
    return {j[0].get<double>(), j[1].get<double>()};
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
    return buf;
}

Json detector_json(const detect::DetectorConfig& d, double temperature, std::size_t top_k) {
    Json j;
    j["detector"] = std::string(detect::detector_name(d.kind));
    j["tau"] = d.tau;
    j["temperature"] = temperature;
    j["top_k"] = top_k;
    if (d.kind == detect::DetectorKind::SoftWpmi) {
        j["lambda"] = d.lambda;
        j["gamma"] = d.gamma;
        j["steepness"] = d.steepness;
        j["wpmi_top_k"] = d.top_k ? Json(*d.top_k) : Json(nullptr);
    }
    if (d.kind == detect::DetectorKind::Iou) j["quantile"] = d.quantile;
    return j;
}

}  // namespace

std::string format_number(double v) {
    if (!std::isfinite(v)) throw ComputeError("cannot serialize non-finite number");
    if (v == 0.0) return "0";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string canonical_dump(const Json& j) {
    std::string out;
    dump(j, out, 0);
    out += '\n';
    return out;
}

Json snapshot_to_json(const telemetry::Snapshot& s) {
    Json j;
    j["format"] = kSnapshotFormat;
    j["run_id"] = s.run_id;
    j["layer"] = s.layer;
    j["epoch"] = s.epoch;
    j["config"] = detector_json(s.detector, s.temperature, s.top_k);
    j["concept_space"] = {{"size", s.concept_count}, {"fingerprint", hex64(s.concept_fingerprint)}};

    Json coords = Json::array();
    Json neurons = Json::array();
    for (const auto& n : s.neurons) {
        coords.push_back(pair(n.coords));
        Json r;
        r["index"] = n.index;
        r["concept"] = n.concept_word;
        r["concept_index"] = n.concept_index;
        r["category"] = std::string(store::category_name(n.category));
        r["similarity"] = n.similarity;
        r["interpretable"] = n.interpretable;
        r["top_images"] = n.top_images;
        if (!n.top_image_ids.empty()) r["top_image_ids"] = n.top_image_ids;
        neurons.push_back(std::move(r));
    }
    Json anchors = Json::array();
    for (const auto& a : s.anchors)
        anchors.push_back({{"word", a.word},
                           {"coords", pair(a.coords)},
                           {"nearest_neuron", a.nearest_neuron},
                           {"distance", a.distance}});
    j["embedding"] = {{"neuron_coords", coords},
                      {"anchors", anchors},
                      {"explained_variance", pair(s.explained_variance)}};
    j["neurons"] = neurons;

    Json counts = Json::object(), pct = Json::object();
    for (const auto& c : s.categories.per_category) {
        const std::string name(store::category_name(c.category));
        counts[name] = c.count;
        pct[name] = c.percentage;
    }
    j["categories"] = {{"category_counts", counts},
                       {"category_percentages", pct},
                       {"interpretable_count", s.categories.interpretable},
                       {"interpretable_percentage", s.categories.interpretable_percentage},
                       {"neuron_count", s.categories.total}};
    j["diversity"] = {{"d_anchor", s.d_anchor}, {"pairwise_diversity", s.pairwise_diversity}};
    return j;
}

telemetry::Snapshot snapshot_from_json(const Json& j) {
    if (get_as<std::string>(j, "format", "") != kSnapshotFormat)
        throw InputError("snapshot: unsupported format, expected " + std::string(kSnapshotFormat));
    telemetry::Snapshot s;
    s.run_id = get_as<std::string>(j, "run_id", "");
    s.layer = get_as<std::string>(j, "layer", "");
    s.epoch = get_as<std::int64_t>(j, "epoch", "");

    const Json& cfg = need(j, "config", "");
    const auto kind = detect::parse_detector(get_as<std::string>(cfg, "detector", "config"));
    if (!kind) throw InputError("snapshot: unknown detector in 'config.detector'");
    s.detector = detect::DetectorConfig::defaults(*kind);
    s.detector.tau = get_as<double>(cfg, "tau", "config");
    s.temperature = get_as<double>(cfg, "temperature", "config");
    s.top_k = get_as<std::size_t>(cfg, "top_k", "config");
    if (*kind == detect::DetectorKind::SoftWpmi) {
        s.detector.lambda = get_as<double>(cfg, "lambda", "config");
        s.detector.gamma = get_as<double>(cfg, "gamma", "config");
        s.detector.steepness = get_as<double>(cfg, "steepness", "config");
        const Json& k = need(cfg, "wpmi_top_k", "config");
        if (!k.is_null()) s.detector.top_k = get_as<std::size_t>(cfg, "wpmi_top_k", "config");
    }
    if (*kind == detect::DetectorKind::Iou) s.detector.quantile = get_as<double>(cfg, "quantile", "config");

    const Json& space = need(j, "concept_space", "");
    s.concept_count = get_as<std::size_t>(space, "size", "concept_space");
    const auto fp = get_as<std::string>(space, "fingerprint", "concept_space");
    try {
        std::size_t used = 0;
        s.concept_fingerprint = std::stoull(fp, &used, 16);
        if (used != fp.size()) throw std::invalid_argument(fp);
    } catch (const std::exception&) {
        throw InputError("snapshot: 'concept_space.fingerprint' is not a hex number");
    }

    const Json& emb = need(j, "embedding", "");
    const Json& coords = need(emb, "neuron_coords", "embedding");
    const Json& neurons = need(j, "neurons", "");
    if (!neurons.is_array() || !coords.is_array() || coords.size() != neurons.size())
        throw InputError("snapshot: 'neurons' and 'embedding.neuron_coords' must be arrays of equal length");
    for (std::size_t i = 0; i < neurons.size(); ++i) {
        const std::string where = "neurons[" + std::to_string(i) + "]";
        const Json& r = neurons[i];
        telemetry::NeuronRecord n;
        n.index = get_as<std::size_t>(r, "index", where);
        n.concept_word = get_as<std::string>(r, "concept", where);
        n.concept_index = get_as<std::size_t>(r, "concept_index", where);
        const auto cat = store::parse_category(get_as<std::string>(r, "category", where));
        if (!cat) throw InputError("snapshot: unknown category in '" + where + ".category'");
        n.category = *cat;
        n.similarity = get_as<double>(r, "similarity", where);
        n.interpretable = get_as<bool>(r, "interpretable", where);
        n.top_images = get_as<std::vector<std::size_t>>(r, "top_images", where);
        if (r.contains("top_image_ids")) n.top_image_ids = get_as<std::vector<std::string>>(r, "top_image_ids", where);
        n.coords = read_pair(coords[i], "embedding.neuron_coords[" + std::to_string(i) + "]");
        s.neurons.push_back(std::move(n));
    }
    const Json& anchors = need(emb, "anchors", "embedding");
    if (!anchors.is_array()) throw InputError("snapshot: 'embedding.anchors' must be an array");
    for (std::size_t i = 0; i < anchors.size(); ++i) {
        const std::string where = "embedding.anchors[" + std::to_string(i) + "]";
        telemetry::AnchorRecord a;
        a.word = get_as<std::string>(anchors[i], "word", where);
        a.coords = read_pair(need(anchors[i], "coords", where), where + ".coords");
        a.nearest_neuron = get_as<std::size_t>(anchors[i], "nearest_neuron", where);
        a.distance = get_as<double>(anchors[i], "distance", where);
        s.anchors.push_back(std::move(a));
    }
    s.explained_variance = read_pair(need(emb, "explained_variance", "embedding"), "embedding.explained_variance");

    const Json& cats = need(j, "categories", "");
    const Json& counts = need(cats, "category_counts", "categories");
    const Json& pct = need(cats, "category_percentages", "categories");
    for (std::size_t c = 0; c < store::kCategoryCount; ++c) {
        const std::string name(store::category_name(store::kAllCategories[c]));
        auto& stat = s.categories.per_category[c];
        stat.category = store::kAllCategories[c];
        stat.count = get_as<std::size_t>(counts, name.c_str(), "categories.category_counts");
        stat.percentage = get_as<double>(pct, name.c_str(), "categories.category_percentages");
    }
    s.categories.interpretable = get_as<std::size_t>(cats, "interpretable_count", "categories");
    s.categories.interpretable_percentage = get_as<double>(cats, "interpretable_percentage", "categories");
    s.categories.total = get_as<std::size_t>(cats, "neuron_count", "categories");

    const Json& div = need(j, "diversity", "");
    s.d_anchor = get_as<double>(div, "d_anchor", "diversity");
    s.pairwise_diversity = get_as<double>(div, "pairwise_diversity", "diversity");
    return s;
}

std::size_t emit_snapshot_json(const telemetry::Snapshot& s, const std::filesystem::path& path) {
    const std::string text = canonical_dump(snapshot_to_json(s));
    store::write_file_atomic(path, text);
    return text.size();
}

telemetry::Snapshot read_snapshot_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open snapshot " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    Json j;
    try {
        j = Json::parse(buf.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError("snapshot " + path.string() + ": invalid JSON at byte " + std::to_string(e.byte));
    }
    return snapshot_from_json(j);
}

Json trajectory_to_json(const telemetry::TrackResult& t) {
    Json j;
    j["format"] = "concept-monitor/trajectory/1";
    j["run_id"] = t.run_id;
    j["layer"] = t.layer;
    j["settle_delta"] = t.settle_delta;
    Json anchors = Json::array();
    for (std::size_t a = 0; a < t.anchor_words.size(); ++a)
        anchors.push_back({{"word", t.anchor_words[a]},
                           {"coords", Json::array({t.anchor_coords(a, 0), t.anchor_coords(a, 1)})}});
    j["anchors"] = anchors;
    j["basis"] = {{"explained_variance", pair(t.basis.explained_variance)}};
    Json trajs = Json::array();
    for (const auto& tr : t.trajectories) {
        Json points = Json::array();
        for (const auto& p : tr.points)
            points.push_back({{"epoch", p.epoch},
                              {"concept", p.concept_word},
                              {"concept_index", p.concept_index},
                              {"similarity", p.similarity},
                              {"coords", pair(p.coords)},
                              {"anchor_distances", p.anchor_distances}});
        trajs.push_back({{"neuron", tr.neuron},
                         {"settle_epoch", tr.settle_epoch ? Json(*tr.settle_epoch) : Json(nullptr)},
                         {"points", points}});
    }
    j["trajectories"] = trajs;
    return j;
}

Json comparison_to_json(const telemetry::RunComparison& c) {
    Json j;
    j["format"] = "concept-monitor/comparison/1";
    j["a"] = c.label_a;
    j["b"] = c.label_b;
    Json cats = Json::object();
    for (const auto& d : c.categories)
        cats[std::string(store::category_name(d.category))] = {{"a", d.count_a}, {"b", d.count_b}, {"delta", d.delta}};
    j["categories"] = cats;
    Json concepts = Json::array();
    for (const auto& r : c.concepts)
        concepts.push_back({{"concept", r.word},
                            {"concept_index", r.concept_index},
                            {"a", r.count_a},
                            {"b", r.count_b},
                            {"delta", r.delta}});
    j["concepts"] = concepts;
    j["interpretable_delta"] = c.interpretable_delta;
    j["d_anchor"] = {{"a", c.d_anchor_a}, {"b", c.d_anchor_b}, {"delta", c.d_anchor_delta}};
    return j;
}

// ---------------------------------------------------------------------------

std::string categories_csv(const telemetry::CategoryStats& stats) {
    std::string out = "category,count,percentage\n";
    for (const auto& c : stats.per_category)
        out += std::string(store::category_name(c.category)) + "," + std::to_string(c.count) + "," +
               format_number(c.percentage) + "\n";
    return out;
}

std::string sweep_csv(std::span<const diversity::SweepPoint> points) {
    std::string out = "temperature,d_anchor\n";
    for (const auto& p : points) out += format_number(p.temperature) + "," + format_number(p.d_anchor) + "\n";
    return out;
}

std::string threshold_csv(std::span<const ThresholdPoint> points) {
    std::string out = "tau,interpretable_count,interpretable_percentage\n";
    for (const auto& p : points)
        out += format_number(p.tau) + "," + std::to_string(p.interpretable) + "," +
               format_number(p.interpretable_percentage) + "\n";
    return out;
}

std::string trace_csv(std::span<const sandbox::TraceRow> rows) {
    std::string out = "step,task_loss,d_anchor,accuracy\n";
    for (const auto& r : rows)
        out += std::to_string(r.step) + "," + format_number(r.task_loss) + "," + format_number(r.d_anchor) + "," +
               format_number(r.accuracy) + "\n";
    return out;
}

std::string diversity_csv(std::span<const EpochDiversity> rows) {
    std::string out = "epoch,d_anchor,pairwise_diversity,interpretable_count\n";
    for (const auto& r : rows)
        out += std::to_string(r.epoch) + "," + format_number(r.d_anchor) + "," + format_number(r.pairwise_diversity) +
               "," + std::to_string(r.interpretable) + "\n";
    return out;
}

}  // namespace concept_monitor::report
