#include "laet/checkpoint.hpp"

#include "laet/error.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace laet {

namespace {

using nlohmann::json;

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
}

std::uint64_t get_u64(std::string_view in) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | static_cast<unsigned char>(in[static_cast<std::size_t>(i)]);
    }
    return v;
}

void put_f64(std::string& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }

double get_f64(std::string_view in) { return std::bit_cast<double>(get_u64(in)); }

struct Named {
    std::string name;
    const Tensor* tensor;
};

std::vector<Named> collect(const LayeredModel& model, const ProbeClassifier& classifier) {
    std::vector<Named> out;
    model.for_each_parameter([&](const std::string& name, const Tensor& t) { out.push_back({"model." + name, &t}); });
    classifier.for_each_parameter(
        [&](const std::string& name, const Tensor& t) { out.push_back({"probe." + name, &t}); });
    if (classifier.has_input_scaler()) {
        out.push_back({"probe.input_mean", &classifier.input_mean()});
        out.push_back({"probe.input_inv_std", &classifier.input_inv_std()});
    }
    return out;
}

[[noreturn]] void corrupt(const std::string& what) { throw CorruptCheckpoint("corrupt checkpoint: " + what); }

struct Parsed {
    json manifest;
    std::vector<TensorEntry> entries;
    std::string_view data;
};

Parsed split_file(std::string_view bytes) {
    if (bytes.size() < 16 || bytes.substr(0, 8) != kCheckpointMagic) {
        corrupt("bad magic");
    }
    const std::uint64_t manifest_len = get_u64(bytes.substr(8, 8));
    if (manifest_len > bytes.size() - 16) {
        corrupt("manifest truncated");
    }
    Parsed p;
    try {
        p.manifest = json::parse(bytes.substr(16, manifest_len));
        std::size_t expected_offset = 0;
        for (const auto& t : p.manifest.at("tensors")) {
            TensorEntry e;
            e.name = t.at("name").get<std::string>();
            e.shape = t.at("shape").get<Shape>();
            e.offset = t.at("offset").get<std::size_t>();
            e.count = t.at("count").get<std::size_t>();
            if (e.offset != expected_offset || e.count != shape_size(e.shape)) {
                corrupt("tensor table is inconsistent at " + e.name);
            }
            expected_offset += 8 * e.count;
            p.entries.push_back(std::move(e));
        }
        p.data = bytes.substr(16 + manifest_len);
        if (p.data.size() != expected_offset) {
            corrupt("data section holds " + std::to_string(p.data.size()) + " bytes, manifest describes " +
                    std::to_string(expected_offset));
        }
    } catch (const json::exception& e) {
        corrupt(std::string("manifest: ") + e.what());
    }
    return p;
}

void fill(Tensor& t, const TensorEntry& e, std::string_view data) {
    if (t.shape() != e.shape) {
        corrupt("shape of " + e.name + " is " + shape_string(e.shape) + ", expected " + shape_string(t.shape()));
    }
    auto values = t.data();
    for (std::size_t i = 0; i < e.count; ++i) {
        values[i] = get_f64(data.substr(e.offset + 8 * i, 8));
    }
    if (!t.all_finite()) {
        corrupt(e.name + " holds non-finite values");
    }
}

} // namespace

std::string serialize_checkpoint(const LayeredModel& model, const ProbeClassifier& classifier,
                                 const CheckpointMeta& meta) {
    const ModelConfig& cfg = model.config();
    json manifest;
    manifest["format_version"] = 1;
    manifest["model"] = {{"layers", cfg.layers},   {"dim", cfg.dim},         {"heads", cfg.heads},
                         {"max_context", cfg.max_context}, {"ff_dim", cfg.ff_dim}, {"vocab_size", cfg.vocab_size}};
    manifest["trainable_mask"] = model.trainable_mask();
    manifest["classifier"] = {{"task", std::string(to_string(classifier.task()))},
                              {"input_dim", classifier.input_dim()},
                              {"output_dim", classifier.output_dim()}};
    manifest["selected_layers"] = meta.selected;
    manifest["readout"] = std::string(to_string(meta.readout));
    manifest["classes"] = meta.classes;

    const auto tensors = collect(model, classifier);
    json table = json::array();
    std::size_t offset = 0;
    for (const auto& [name, t] : tensors) {
        table.push_back({{"name", name}, {"shape", t->shape()}, {"offset", offset}, {"count", t->size()}});
        offset += 8 * t->size();
    }
    manifest["tensors"] = std::move(table);
    const std::string text = manifest.dump();

    std::string out;
    out.reserve(16 + text.size() + offset);
    out.append(kCheckpointMagic);
    put_u64(out, text.size());
    out.append(text);
    for (const auto& [name, t] : tensors) {
        for (double v : t->data()) {
            put_f64(out, v);
        }
    }
    return out;
}

std::vector<TensorEntry> checkpoint_manifest(std::string_view bytes) { return split_file(bytes).entries; }

Checkpoint parse_checkpoint(std::string_view bytes) {
    const Parsed p = split_file(bytes);
    try {
        const json& m = p.manifest;
        ModelConfig cfg;
        cfg.layers = m.at("model").at("layers").get<std::size_t>();
        cfg.dim = m.at("model").at("dim").get<std::size_t>();
        cfg.heads = m.at("model").at("heads").get<std::size_t>();
        cfg.max_context = m.at("model").at("max_context").get<std::size_t>();
        cfg.ff_dim = m.at("model").at("ff_dim").get<std::size_t>();
        cfg.vocab_size = m.at("model").at("vocab_size").get<std::size_t>();
        const auto& c = m.at("classifier");
        const TaskKind task =
            c.at("task").get<std::string>() == "regression" ? TaskKind::Regression : TaskKind::Classification;

        Checkpoint out{LayeredModel(cfg, 0),
                       ProbeClassifier(c.at("input_dim").get<std::size_t>(), task,
                                       c.at("output_dim").get<std::size_t>(), 0),
                       {}};
        out.meta.selected = m.at("selected_layers").get<std::vector<std::size_t>>();
        out.meta.readout = parse_readout(m.at("readout").get<std::string>());
        out.meta.classes = m.at("classes").get<std::vector<std::string>>();

        std::size_t next = 0;
        auto take = [&](const std::string& name, Tensor& t) {
            if (next >= p.entries.size() || p.entries[next].name != name) {
                corrupt("expected tensor " + name);
            }
            fill(t, p.entries[next++], p.data);
        };
        out.model.for_each_parameter([&](const std::string& name, Tensor& t) { take("model." + name, t); });
        out.classifier.for_each_parameter([&](const std::string& name, Tensor& t) { take("probe." + name, t); });
        if (next < p.entries.size()) {
            Tensor mean(Shape{cfg.layers, cfg.dim});
            Tensor inv_std(Shape{cfg.layers, cfg.dim});
            take("probe.input_mean", mean);
            take("probe.input_inv_std", inv_std);
            out.classifier.set_input_scaler(std::move(mean), std::move(inv_std));
        }
        if (next != p.entries.size()) {
            corrupt("unexpected tensor " + p.entries[next].name);
        }
        const auto mask = m.at("trainable_mask").get<std::vector<bool>>();
        std::vector<std::size_t> trainable;
        for (std::size_t l = 0; l < mask.size(); ++l) {
            if (mask[l]) {
                trainable.push_back(l + 1);
            }
        }
        out.model.set_trainable(trainable);
        return out;
    } catch (const json::exception& e) {
        corrupt(std::string("manifest: ") + e.what());
    } catch (const InvalidArgument& e) {
        corrupt(e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const LayeredModel& model,
                     const ProbeClassifier& classifier, const CheckpointMeta& meta) {
    const std::string bytes = serialize_checkpoint(model, classifier, meta);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw InvalidArgument("cannot write " + tmp.string());
        }
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw InvalidArgument("failed writing " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InvalidArgument("cannot open checkpoint " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_checkpoint(buf.str());
}

} // namespace laet
