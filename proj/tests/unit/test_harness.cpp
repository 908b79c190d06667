#include "laet/checkpoint.hpp"
#include "laet/config.hpp"
#include "laet/error.hpp"
#include "laet/metrics.hpp"
#include "laet/pipeline.hpp"

#include "support.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <sys/wait.h>

using namespace laet;
using laet::testing::TempDir;
using laet::testing::tiny_config;
using Json = nlohmann::json;

namespace {

ExperimentConfig parse_text(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

struct WalkedTensor {
    std::string name;
    std::size_t offset;
    std::size_t count;
};

// Reads the container format directly: magic, length, manifest, data.
std::vector<WalkedTensor> walk_checkpoint(const std::string& bytes, bool& contiguous) {
    REQUIRE(bytes.size() >= 16);
    REQUIRE(bytes.substr(0, 8) == "LAETCKPT");
    std::uint64_t len = 0;
    for (int i = 7; i >= 0; --i) {
        len = (len << 8) | static_cast<unsigned char>(bytes[8 + i]);
    }
    const Json manifest = Json::parse(bytes.substr(16, len));
    const std::size_t data_size = bytes.size() - 16 - len;
    std::vector<WalkedTensor> out;
    std::size_t expected = 0;
    contiguous = true;
    for (const auto& t : manifest.at("tensors")) {
        WalkedTensor w{t.at("name"), t.at("offset"), t.at("count")};
        std::size_t product = 1;
        for (const auto& d : t.at("shape")) {
            product *= d.get<std::size_t>();
        }
        contiguous = contiguous && w.offset == expected && product == w.count;
        expected = w.offset + 8 * w.count;
        out.push_back(std::move(w));
    }
    contiguous = contiguous && expected == data_size;
    return out;
}

Json read_json(const std::filesystem::path& p) { return Json::parse(read_file(p)); }

std::vector<Json> read_jsonl_rows(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::vector<Json> rows;
    std::string line;
    while (std::getline(in, line)) {
        rows.push_back(Json::parse(line));
    }
    return rows;
}

} // namespace

TEST_SUITE("config") {
    TEST_CASE("dotted keys, comments and defaults") {
        const auto c = parse_text(R"(
# comment line
synth.task = suffix
synth.size = 90   # trailing comment
model.layers = 5
probe.lr = 0.01
selection.strategy = first-std
seed = 11
)");
        REQUIRE(c.synth.has_value());
        CHECK(c.synth->task == SynthTask::Suffix);
        CHECK(c.synth->size == 90);
        CHECK(c.model.layers == 5);
        CHECK(c.probe.lr == 0.01);
        CHECK(c.selection.strategy == SelectionStrategy::FirstStd);
        CHECK(c.selection.alpha == 0.5);
        CHECK(c.seed == 11);
        c.validate();
    }

    TEST_CASE("errors carry the line number") {
        try {
            parse_text("seed = 1\nmodel.layers = 4\nmodel.depth = 3\n");
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.line() == 3);
        }
        CHECK_THROWS_AS(parse_text("seed 1\n"), ParseError);
        CHECK_THROWS_AS(parse_text("model.layers = many\n"), ParseError);
    }

    TEST_CASE("validation") {
        ExperimentConfig c;
        CHECK_THROWS_AS(c.validate(), InvalidArgument);
        c.data_path = "/definitely/not/here.jsonl";
        CHECK_THROWS_AS(c.validate(), InvalidArgument);
        TempDir dir;
        auto t = tiny_config(dir.path());
        t.split = {0.8, 0.2, 0.1};
        CHECK_THROWS_AS(t.validate(), InvalidArgument);
    }

    TEST_CASE("relative data paths resolve against the config file") {
        TempDir dir;
        std::filesystem::create_directories(dir / "sub");
        std::ofstream(dir / "sub" / "d.jsonl") << R"({"instruction": "", "text": "a", "answer": "x"})" << "\n";
        std::ofstream(dir / "sub" / "run.conf") << "data.path = d.jsonl\n";
        const auto c = load_config(dir / "sub" / "run.conf");
        CHECK(c.data_path == dir / "sub" / "d.jsonl");
    }

    TEST_CASE("grids") {
        const auto g = parse_grid("0.3:0.3, 0.5:0.7");
        REQUIRE(g.size() == 2);
        CHECK(g[1] == std::pair{0.5, 0.7});
        CHECK_THROWS_AS(parse_grid("0.3"), InvalidArgument);
        CHECK_THROWS_AS(parse_grid(""), InvalidArgument);
        CHECK(sweep_cell_name(0.3, 0.7) == "alpha0.3_beta0.7");
    }

    TEST_CASE("entries list every key in order") {
        const auto e = ExperimentConfig{}.entries();
        CHECK(std::is_sorted(e.begin(), e.end()));
        std::set<std::string> keys;
        for (const auto& [k, v] : e) {
            keys.insert(k);
        }
        CHECK(keys.count("selection.alpha") == 1);
        CHECK(keys.count("finetune.model_lr") == 1);
    }
}

TEST_SUITE("checkpoint") {
    ModelConfig small() {
        ModelConfig c;
        c.layers = 2;
        c.dim = 8;
        c.heads = 2;
        c.max_context = 16;
        return c;
    }

    TEST_CASE("round trip is bitwise") {
        LayeredModel model(small(), 3);
        model.set_trainable(std::vector<std::size_t>{2});
        const ProbeClassifier head(8, TaskKind::Classification, 3, 4);
        const CheckpointMeta meta{{2}, Readout::Sum, {"a", "b", "c"}};
        TempDir dir;
        save_checkpoint(dir / "m.laet", model, head, meta);
        const auto back = load_checkpoint(dir / "m.laet");
        CHECK(back.model.block_bytes(1) == model.block_bytes(1));
        CHECK(back.model.block_bytes(2) == model.block_bytes(2));
        CHECK(back.model.token_table().bitwise_equal(model.token_table()));
        CHECK(back.model.trainable_mask() == model.trainable_mask());
        CHECK(back.classifier.bitwise_equal(head));
        CHECK(back.meta.selected == meta.selected);
        CHECK(back.meta.readout == Readout::Sum);
        CHECK(back.meta.classes == meta.classes);
        CHECK(serialize_checkpoint(back.model, back.classifier, back.meta) ==
              serialize_checkpoint(model, head, meta));
    }

    TEST_CASE("truncation and bad magic are rejected") {
        const LayeredModel model(small(), 3);
        const ProbeClassifier head(8, TaskKind::Classification, 2, 4);
        const std::string bytes = serialize_checkpoint(model, head, {});
        for (const std::size_t cut : {std::size_t{0}, std::size_t{7}, std::size_t{20}, bytes.size() - 1}) {
            CHECK_THROWS_AS(parse_checkpoint(std::string_view(bytes).substr(0, cut)), CorruptCheckpoint);
        }
        std::string bad = bytes;
        bad[0] = 'X';
        CHECK_THROWS_AS(parse_checkpoint(bad), CorruptCheckpoint);
        CHECK_THROWS_AS(parse_checkpoint(bytes + "extra"), CorruptCheckpoint);
    }

    TEST_CASE("manifest offsets are strictly increasing and gap-free") {
        const LayeredModel model(small(), 3);
        ProbeClassifier head(8, TaskKind::Classification, 2, 4);
        const std::string bytes = serialize_checkpoint(model, head, {});
        bool contiguous = false;
        const auto walked = walk_checkpoint(bytes, contiguous);
        CHECK(contiguous);
        const auto entries = checkpoint_manifest(bytes);
        REQUIRE(entries.size() == walked.size());
        for (std::size_t i = 0; i < entries.size(); ++i) {
            CHECK(entries[i].name == walked[i].name);
            CHECK(entries[i].offset == walked[i].offset);
            if (i > 0) {
                CHECK(entries[i].offset > entries[i - 1].offset);
            }
        }
    }
}

TEST_SUITE("pipeline") {
    TEST_CASE("tiny run: determinism, consistency and parameter accounting") {
        TempDir a;
        TempDir b;
        const auto ra = run_pipeline(tiny_config(a / "out"));
        run_pipeline(tiny_config(b / "out"));
        for (const char* f : {"report.json", "layer_metrics.json", "layer_metrics.csv", "selection.json",
                              "checkpoint.laet", "predictions.jsonl"}) {
            INFO(f);
            REQUIRE(std::filesystem::exists(a / "out" / f));
            CHECK(read_file(a / "out" / f) == read_file(b / "out" / f));
        }

        const Json report = read_json(a / "out" / "report.json");
        const auto classes = report.at("data").at("classes").get<std::vector<std::string>>();
        std::map<std::string, std::size_t> index;
        for (std::size_t i = 0; i < classes.size(); ++i) {
            index[classes[i]] = i;
        }
        std::vector<std::size_t> preds;
        std::vector<std::size_t> labels;
        for (const auto& row : read_jsonl_rows(a / "out" / "predictions.jsonl")) {
            preds.push_back(index.at(row.at("predicted").get<std::string>()));
            labels.push_back(index.at(row.at("answer").get<std::string>()));
        }
        REQUIRE(preds.size() == report.at("data").at("test").get<std::size_t>());
        const auto& test = report.at("evaluation").at("test");
        CHECK(test.at("accuracy").get<double>() == doctest::Approx(metrics::accuracy(preds, labels)).epsilon(1e-6));
        CHECK(test.at("macro_f1").get<double>() ==
              doctest::Approx(metrics::f1_scores(preds, labels, classes.size()).macro).epsilon(1e-6));
        CHECK(test.at("mcc").get<double>() ==
              doctest::Approx(metrics::mcc(preds, labels, classes.size())).epsilon(1e-6));

        bool contiguous = false;
        const auto walked = walk_checkpoint(read_file(a / "out" / "checkpoint.laet"), contiguous);
        CHECK(contiguous);
        std::size_t model_total = 0, layer_one = 0, head = 0;
        for (const auto& t : walked) {
            if (t.name.rfind("model.", 0) == 0) {
                model_total += t.count;
            }
            if (t.name.rfind("model.layers.1.", 0) == 0) {
                layer_one += t.count;
            }
            if (t.name.rfind("probe.", 0) == 0 && t.name.find("input_") == std::string::npos) {
                head += t.count;
            }
        }
        const auto selected = report.at("selection").at("selected").get<std::vector<std::size_t>>();
        const auto& params = report.at("evaluation").at("parameters");
        CHECK(params.at("total").get<std::size_t>() == model_total + head);
        CHECK(params.at("per_layer").get<std::size_t>() == layer_one);
        CHECK(params.at("classifier").get<std::size_t>() == head);
        CHECK(params.at("trainable").get<std::size_t>() == selected.size() * layer_one + head);
        CHECK(params.at("trainable_fraction").get<double>() ==
              doctest::Approx(static_cast<double>(selected.size() * layer_one + head) /
                              static_cast<double>(model_total + head))
                  .epsilon(1e-6));
        CHECK(ra.report.selection.selected == selected);
    }

    TEST_CASE("standalone probing equals the probing inside a run") {
        TempDir dir;
        const auto config = tiny_config(dir / "out", 9);
        const auto phase = run_probe_phase(config, prepare_data(config));
        const auto run = run_pipeline(config);
        REQUIRE(phase.run.table.num_layers() == run.report.layer_metrics.num_layers());
        for (std::size_t l = 1; l <= phase.run.table.num_layers(); ++l) {
            CHECK(phase.run.table.layer(l).m1 == run.report.layer_metrics.layer(l).m1);
            CHECK(phase.run.table.layer(l).m2 == run.report.layer_metrics.layer(l).m2);
        }
        CHECK(parse_layer_metrics_json(read_file(dir / "out" / "layer_metrics.json")).rows.size() ==
              phase.run.table.num_layers());
    }

    TEST_CASE("a failing stage is named and leaves no outputs") {
        TempDir dir;
        auto config = tiny_config(dir / "out");
        config.finetune.model_lr = 1e200;
        config.finetune.classifier_lr = 1e200;
        config.finetune.clip_norm = 0.0;
        try {
            run_pipeline(config);
            FAIL("expected the run to fail");
        } catch (const StageError& e) {
            CHECK(e.stage() == "finetune");
        }
        CHECK_FALSE(std::filesystem::exists(dir / "out"));
    }

    TEST_CASE("missing data fails in the config stage") {
        TempDir dir;
        ExperimentConfig config;
        config.out = dir / "out";
        try {
            run_pipeline(config);
            FAIL("expected the run to fail");
        } catch (const StageError& e) {
            CHECK(e.stage() == "config");
        }
    }
}

TEST_SUITE("sweep and strategies") {
    TEST_CASE("sweep rows match independent runs") {
        TempDir dir;
        auto config = tiny_config(dir / "out", 12);
        config.selection.strategy = SelectionStrategy::Threshold;
        config.sweep_grid = {{0.3, 0.3}, {0.5, 0.5}, {0.7, 0.7}};
        const auto rows = sweep_alpha_beta(config);
        REQUIRE(rows.size() == 3);
        CHECK(std::filesystem::exists(dir / "out" / "sweep.csv"));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            REQUIRE(rows[i].ok);
            if (i > 0) {
                CHECK(rows[i].selected.size() >= rows[i - 1].selected.size());
            }
            CHECK(std::filesystem::exists(dir / "out" / "sweep" / sweep_cell_name(rows[i].alpha, rows[i].beta) /
                                          "report.json"));
        }
        for (const auto& row : rows) {
            auto single = config;
            single.selection.alpha = row.alpha;
            single.selection.beta = row.beta;
            single.out = dir / ("single" + sweep_cell_name(row.alpha, row.beta));
            const auto r = run_pipeline(single);
            CHECK(r.report.selection.selected == row.selected);
            CHECK(r.report.evaluation.test.accuracy == row.test.accuracy);
            CHECK(r.report.evaluation.parameters.trainable == row.parameters.trainable);
        }
    }

    TEST_CASE("strategy curves have 3L rows and are deterministic") {
        TempDir a;
        TempDir b;
        auto config = tiny_config(a / "out", 13);
        config.synth->task = SynthTask::Suffix;
        const auto curves = compare_probe_strategies(config);
        REQUIRE(curves.size() == 3);
        std::size_t rows = 0;
        for (const auto& c : curves) {
            rows += c.table.num_layers();
        }
        CHECK(rows == 3 * config.model.layers);
        const std::string csv = read_file(a / "out" / "strategies.csv");
        CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == rows + 1);
        config.out = b / "out";
        compare_probe_strategies(config);
        CHECK(read_file(b / "out" / "strategies.csv") == csv);
    }
}

#ifdef LAET_CLI_PATH
TEST_SUITE("cli") {
    int run_cli(const std::string& args) {
        const std::string cmd = std::string("\"") + LAET_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    TEST_CASE("exit codes") {
        TempDir dir;
        const std::string out = (dir / "out").string();
        CHECK(run_cli("--help") == 0);
        CHECK(run_cli("synth --synth keyword --size 60 --out \"" + out + "\"") == 0);
        CHECK(std::filesystem::exists(dir / "out" / "synth.jsonl"));
        CHECK(run_cli("pipeline --no-such-flag") == 1);
        CHECK(run_cli("pipeline --out \"" + out + "\"") == 1);
        CHECK(run_cli("probe --data /definitely/not/here.jsonl") == 1);
        std::ofstream(dir / "bad.jsonl") << "{broken\n";
        CHECK(run_cli("probe --data \"" + (dir / "bad.jsonl").string() + "\" --out \"" + out + "\"") == 2);
        CHECK(run_cli("select --synth keyword --out \"" + (dir / "empty").string() + "\"") == 2);
    }
}
#endif
