#include "laet/dataset.hpp"

#include "laet/error.hpp"
#include "laet/random.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

namespace laet {

std::string_view to_string(TaskKind kind) {
    return kind == TaskKind::Classification ? "classification" : "regression";
}

TaskMode parse_task_mode(std::string_view name) {
    if (name == "auto") {
        return TaskMode::Auto;
    }
    if (name == "classification") {
        return TaskMode::Classification;
    }
    if (name == "regression") {
        return TaskMode::Regression;
    }
    throw InvalidArgument("unknown task mode '" + std::string(name) + "'");
}

bool parse_decimal(std::string_view text, double& out) {
    if (text.empty()) {
        return false;
    }
    if (text.front() == '+') {
        text.remove_prefix(1);
    }
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, out, std::chars_format::general);
    return ec == std::errc() && ptr == end && std::isfinite(out);
}

LabelCodec LabelCodec::classification(std::vector<std::string> classes) {
    std::ranges::sort(classes);
    if (std::ranges::adjacent_find(classes) != classes.end()) {
        throw InvalidArgument("class names must be unique");
    }
    if (classes.size() < 2) {
        throw InvalidArgument("classification needs at least two classes");
    }
    LabelCodec codec;
    codec.task_ = TaskKind::Classification;
    codec.classes_ = std::move(classes);
    return codec;
}

LabelCodec LabelCodec::regression() {
    LabelCodec codec;
    codec.task_ = TaskKind::Regression;
    return codec;
}

LabelCodec LabelCodec::infer(std::span<const DatasetRecord> records, TaskMode mode) {
    if (records.empty()) {
        throw InvalidArgument("cannot infer labels from an empty dataset");
    }
    const bool numeric = std::ranges::all_of(records, [](const DatasetRecord& r) {
        double v = 0.0;
        return parse_decimal(r.answer, v);
    });
    if (mode == TaskMode::Regression || (mode == TaskMode::Auto && numeric)) {
        if (!numeric) {
            throw InvalidArgument("regression mode requires every answer to be a decimal number");
        }
        return regression();
    }
    std::set<std::string> distinct;
    for (const auto& r : records) {
        distinct.insert(r.answer);
    }
    return classification({distinct.begin(), distinct.end()});
}

std::size_t LabelCodec::encode(std::string_view answer) const {
    if (task_ != TaskKind::Classification) {
        throw ContractViolation("encode() on a regression codec");
    }
    const auto it = std::ranges::lower_bound(classes_, answer);
    if (it == classes_.end() || *it != answer) {
        throw InvalidArgument("answer '" + std::string(answer) + "' is not a declared class");
    }
    return static_cast<std::size_t>(it - classes_.begin());
}

double LabelCodec::encode_target(std::string_view answer) const {
    double v = 0.0;
    if (!parse_decimal(answer, v)) {
        throw InvalidArgument("answer '" + std::string(answer) + "' is not a decimal number");
    }
    return v;
}

const std::string& LabelCodec::decode(std::size_t label) const {
    if (label >= classes_.size()) {
        throw InvalidArgument("label " + std::to_string(label) + " out of range");
    }
    return classes_[label];
}

std::vector<DatasetRecord> read_jsonl(std::istream& in) {
    std::vector<DatasetRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.find_first_not_of(" \t") == std::string::npos) {
            continue;
        }
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
        }
        if (!obj.is_object()) {
            throw ParseError(line_no, "expected a JSON object");
        }
        DatasetRecord r;
        for (const char* key : {"instruction", "text", "answer"}) {
            if (!obj.contains(key)) {
                throw ParseError(line_no, std::string("missing key '") + key + "'");
            }
        }
        const auto& answer = obj["answer"];
        if (!obj["instruction"].is_string() || !obj["text"].is_string()) {
            throw ParseError(line_no, "instruction and text must be strings");
        }
        r.instruction = obj["instruction"].get<std::string>();
        r.text = obj["text"].get<std::string>();
        if (answer.is_string()) {
            r.answer = answer.get<std::string>();
        } else if (answer.is_number()) {
            r.answer = answer.dump();
        } else {
            throw ParseError(line_no, "answer must be a string or a number");
        }
        if (r.answer.empty()) {
            throw ParseError(line_no, "answer must not be empty");
        }
        records.push_back(std::move(r));
    }
    return records;
}

LoadedDataset load_jsonl(const std::filesystem::path& path, TaskMode mode) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InvalidArgument("cannot open dataset " + path.string());
    }
    LoadedDataset out;
    out.records = read_jsonl(in);
    if (out.records.empty()) {
        throw InvalidArgument("dataset " + path.string() + " contains no records");
    }
    out.codec = LabelCodec::infer(out.records, mode);
    return out;
}

void write_jsonl(std::ostream& out, std::span<const DatasetRecord> records) {
    for (const auto& r : records) {
        nlohmann::ordered_json obj;
        obj["instruction"] = r.instruction;
        obj["text"] = r.text;
        obj["answer"] = r.answer;
        out << obj.dump() << '\n';
    }
}

void write_jsonl(const std::filesystem::path& path, std::span<const DatasetRecord> records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw InvalidArgument("cannot write " + path.string());
    }
    write_jsonl(out, records);
}

std::string format_prompt(const DatasetRecord& record) { return record.instruction + record.text + " Answer:"; }

LabeledSet to_labeled_set(std::span<const DatasetRecord> records, const LabelCodec& codec) {
    LabeledSet set;
    set.task = codec.task();
    set.num_classes = codec.task() == TaskKind::Classification ? codec.num_classes() : 0;
    set.examples.reserve(records.size());
    for (const auto& r : records) {
        LabeledExample ex;
        ex.prompt = format_prompt(r);
        if (codec.task() == TaskKind::Classification) {
            ex.label = codec.encode(r.answer);
        } else {
            ex.target = codec.encode_target(r.answer);
        }
        set.examples.push_back(std::move(ex));
    }
    return set;
}

std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(std::span(order));
    return order;
}

std::vector<std::size_t> stratified_order(std::span<const std::size_t> strata, std::uint64_t seed) {
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < strata.size(); ++i) {
        groups[strata[i]].push_back(i);
    }
    Rng rng(seed);
    struct Keyed {
        double key;
        std::size_t stratum;
        std::size_t index;
    };
    std::vector<Keyed> keyed;
    keyed.reserve(strata.size());
    for (auto& [stratum, members] : groups) {
        rng.shuffle(std::span(members));
        const auto m = static_cast<double>(members.size());
        for (std::size_t r = 0; r < members.size(); ++r) {
            keyed.push_back({(static_cast<double>(r) + 0.5) / m, stratum, members[r]});
        }
    }
    std::ranges::sort(keyed, [](const Keyed& a, const Keyed& b) {
        return a.key != b.key ? a.key < b.key : a.stratum < b.stratum;
    });
    std::vector<std::size_t> order;
    order.reserve(keyed.size());
    for (const auto& k : keyed) {
        order.push_back(k.index);
    }
    return order;
}

DatasetSplit split(std::span<const DatasetRecord> records, const SplitFractions& fractions, std::uint64_t seed,
                   const LabelCodec& codec) {
    const double total = fractions.train + fractions.validation + fractions.test;
    if (!(fractions.train > 0.0) || !(fractions.validation > 0.0) || !(fractions.test > 0.0)) {
        throw InvalidArgument("split fractions must be positive");
    }
    if (total > 1.0 + 1e-9) {
        throw InvalidArgument("split fractions sum to more than 1");
    }
    const std::size_t n = records.size();
    std::vector<std::size_t> order;
    if (codec.task() == TaskKind::Classification) {
        std::vector<std::size_t> labels;
        labels.reserve(n);
        for (const auto& r : records) {
            labels.push_back(codec.encode(r.answer));
        }
        order = stratified_order(labels, seed);
    } else {
        order = shuffled_order(n, seed);
    }
    auto count = [n](double f) { return static_cast<std::size_t>(std::llround(f * static_cast<double>(n))); };
    const std::size_t n_train = std::min(count(fractions.train), n);
    const std::size_t n_val = std::min(count(fractions.validation), n - n_train);
    const std::size_t n_test =
        std::abs(total - 1.0) <= 1e-9 ? n - n_train - n_val : std::min(count(fractions.test), n - n_train - n_val);

    DatasetSplit out;
    std::size_t pos = 0;
    for (auto [target, size] : {std::pair{&out.train, n_train}, {&out.validation, n_val}, {&out.test, n_test}}) {
        target->reserve(size);
        for (std::size_t i = 0; i < size; ++i) {
            target->push_back(records[order[pos++]]);
        }
    }
    return out;
}

} // namespace laet
