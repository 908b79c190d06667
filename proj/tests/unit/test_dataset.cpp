#include "laet/dataset.hpp"
#include "laet/error.hpp"
#include "laet/synth.hpp"

#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

using namespace laet;
using laet::testing::TempDir;

namespace {

std::vector<DatasetRecord> read_string(const std::string& text) {
    std::istringstream in(text);
    return read_jsonl(in);
}

// The one uppercase word names the class: keyword c starts with letter 3c.
std::size_t keyword_oracle(const std::string& text) {
    std::istringstream words(text);
    std::string w;
    while (words >> w) {
        if (std::all_of(w.begin(), w.end(), [](char c) { return c >= 'A' && c <= 'Z'; })) {
            return static_cast<std::size_t>(w[0] - 'A') / 3;
        }
    }
    return 999;
}

std::size_t class_index(const std::string& answer) { return std::stoul(answer.substr(1)); }

std::vector<DatasetRecord> labeled(std::size_t zeros, std::size_t ones) {
    std::vector<DatasetRecord> out;
    for (std::size_t i = 0; i < zeros + ones; ++i) {
        out.push_back({"", "item " + std::to_string(i), i < zeros ? "neg" : "pos"});
    }
    return out;
}

std::size_t count_answer(const std::vector<DatasetRecord>& rs, const std::string& a) {
    return static_cast<std::size_t>(std::count_if(rs.begin(), rs.end(), [&](const auto& r) { return r.answer == a; }));
}

} // namespace

TEST_SUITE("jsonl") {
    TEST_CASE("yes/no answers give a sorted two-class codec") {
        const auto rs = read_string(R"({"instruction": "Q? ", "text": "a", "answer": "yes"}
{"instruction": "Q? ", "text": "b", "answer": "no"}
)");
        const auto codec = LabelCodec::infer(rs);
        CHECK(codec.task() == TaskKind::Classification);
        CHECK(codec.classes() == std::vector<std::string>{"no", "yes"});
        CHECK(codec.encode("yes") == 1);
        CHECK(codec.decode(0) == "no");
        CHECK_THROWS_AS(static_cast<void>(codec.encode("maybe")), InvalidArgument);
    }

    TEST_CASE("numeric answers infer regression") {
        const auto rs = read_string(R"({"instruction": "", "text": "x", "answer": 1.5}
{"instruction": "", "text": "y", "answer": "-2"}
)");
        const auto codec = LabelCodec::infer(rs);
        CHECK(codec.task() == TaskKind::Regression);
        CHECK(codec.encode_target("-2") == -2.0);
        CHECK(LabelCodec::infer(rs, TaskMode::Classification).task() == TaskKind::Classification);
    }

    TEST_CASE("empty files are rejected") {
        TempDir dir;
        std::ofstream(dir / "empty.jsonl").close();
        CHECK_THROWS_AS(load_jsonl(dir / "empty.jsonl"), InvalidArgument);
        CHECK_THROWS_AS(load_jsonl(dir / "missing.jsonl"), InvalidArgument);
    }

    TEST_CASE("malformed lines report their line number") {
        try {
            read_string("{\"instruction\": \"\", \"text\": \"a\", \"answer\": \"x\"}\n\n{not json}\n");
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.line() == 3);
        }
        CHECK_THROWS_AS(read_string(R"({"text": "a", "answer": "x"})"), ParseError);
        CHECK_THROWS_AS(read_string(R"({"instruction": "", "text": "a", "answer": ""})"), ParseError);
    }

    TEST_CASE("unknown keys are ignored") {
        const auto rs = read_string(R"({"instruction": "I ", "text": "t", "answer": "a", "source": "web", "id": 4})");
        REQUIRE(rs.size() == 1);
        CHECK(rs[0] == DatasetRecord{"I ", "t", "a"});
    }

    TEST_CASE("property: write then read is the identity") {
        SynthSpec s;
        s.size = 60;
        s.task = SynthTask::Suffix;
        auto records = synth_generate(s);
        records.push_back({"quote \" and \\ and \n newline ", "tab\tutf8 \xC3\xA9", "c00"});
        std::ostringstream out;
        write_jsonl(out, records);
        CHECK(read_string(out.str()) == records);

        TempDir dir;
        write_jsonl(dir / "r.jsonl", records);
        CHECK(load_jsonl(dir / "r.jsonl").records == records);
    }
}

TEST_SUITE("prompt") {
    TEST_CASE("template") {
        CHECK(format_prompt({"Classify. ", "good", "pos"}) == "Classify. good Answer:");
        CHECK(format_prompt({"", "good", "pos"}) == "good Answer:");
        const auto p = format_prompt({"x", "", "pos"});
        CHECK(p.size() >= 7);
        CHECK(p.substr(p.size() - 7) == "Answer:");
    }

    TEST_CASE("labeled sets carry encoded answers") {
        const auto rs = labeled(2, 3);
        const auto set = to_labeled_set(rs, LabelCodec::infer(rs));
        CHECK(set.num_classes == 2);
        CHECK(set.examples[0].label == 0);
        CHECK(set.examples[4].label == 1);
        CHECK(set.examples[4].prompt == "item 4 Answer:");
    }
}

TEST_SUITE("split") {
    TEST_CASE("80/10/10 sizes and determinism") {
        const auto rs = labeled(50, 50);
        const auto codec = LabelCodec::infer(rs);
        const auto a = split(rs, {}, 3, codec);
        CHECK(a.train.size() == 80);
        CHECK(a.validation.size() == 10);
        CHECK(a.test.size() == 10);
        const auto b = split(rs, {}, 3, codec);
        CHECK(a.train == b.train);
        CHECK(a.test == b.test);
        const auto c = split(rs, {}, 4, codec);
        CHECK_FALSE(a.train == c.train);
    }

    TEST_CASE("stratified class ratios stay within one record") {
        const auto rs = labeled(90, 10);
        const auto codec = LabelCodec::infer(rs);
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const auto s = split(rs, {}, seed, codec);
            for (const auto* part : {&s.train, &s.validation, &s.test}) {
                const double expected = 0.1 * static_cast<double>(part->size());
                CHECK(std::abs(static_cast<double>(count_answer(*part, "pos")) - expected) <= 1.0);
            }
        }
    }

    TEST_CASE("parts are disjoint and cover the input") {
        SynthSpec spec;
        spec.size = 97;
        const auto rs = synth_generate(spec);
        const auto codec = LabelCodec::infer(rs);
        const auto s = split(rs, {0.7, 0.2, 0.1}, 9, codec);
        std::map<std::string, int> seen;
        for (const auto& r : rs) {
            seen[r.text + "|" + r.answer] += 1;
        }
        for (const auto* part : {&s.train, &s.validation, &s.test}) {
            for (const auto& r : *part) {
                seen[r.text + "|" + r.answer] -= 1;
            }
        }
        CHECK(std::all_of(seen.begin(), seen.end(), [](const auto& kv) { return kv.second == 0; }));
        CHECK(s.train.size() + s.validation.size() + s.test.size() == 97);
    }

    TEST_CASE("fractions above one are rejected") {
        const auto rs = labeled(10, 10);
        CHECK_THROWS_AS(split(rs, {0.8, 0.2, 0.1}, 1, LabelCodec::infer(rs)), InvalidArgument);
    }

    TEST_CASE("stratified order keeps every prefix balanced") {
        std::vector<std::size_t> strata;
        for (std::size_t i = 0; i < 60; ++i) {
            strata.push_back(i < 40 ? 0 : (i < 55 ? 1 : 2));
        }
        const auto order = stratified_order(strata, 5);
        std::vector<std::size_t> sorted = order;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            REQUIRE(sorted[i] == i);
        }
        std::vector<double> count(3, 0.0);
        for (std::size_t p = 0; p < order.size(); ++p) {
            count[strata[order[p]]] += 1.0;
            const double n = static_cast<double>(p + 1);
            CHECK(std::abs(count[0] - n * 40.0 / 60.0) <= 1.0);
            CHECK(std::abs(count[1] - n * 15.0 / 60.0) <= 1.0);
            CHECK(std::abs(count[2] - n * 5.0 / 60.0) <= 1.0);
        }
    }
}

TEST_SUITE("synth") {
    TEST_CASE("keyword oracle is exact without noise") {
        SynthSpec s;
        s.size = 600;
        s.classes = 5;
        s.seed = 1;
        const auto rs = synth_generate(s);
        std::vector<std::size_t> per_class(5, 0);
        for (const auto& r : rs) {
            CHECK(keyword_oracle(r.text) == class_index(r.answer));
            ++per_class[class_index(r.answer)];
        }
        CHECK(per_class == std::vector<std::size_t>(5, 120));
    }

    TEST_CASE("ten percent noise caps the oracle near 0.9") {
        SynthSpec s;
        s.size = 2000;
        s.noise = 0.1;
        s.seed = 2;
        const auto rs = synth_generate(s);
        std::size_t hits = 0;
        for (const auto& r : rs) {
            hits += keyword_oracle(r.text) == class_index(r.answer);
        }
        CHECK(std::abs(static_cast<double>(hits) / 2000.0 - 0.9) <= 0.02);
    }

    TEST_CASE("suffix class is the text length modulo k") {
        SynthSpec s;
        s.task = SynthTask::Suffix;
        s.size = 300;
        s.classes = 4;
        const auto rs = synth_generate(s);
        for (const auto& r : rs) {
            CHECK(r.text.size() % 4 == class_index(r.answer));
            CHECK(r.text.size() >= 20);
        }
    }

    TEST_CASE("same seed gives the same bytes") {
        SynthSpec s;
        s.seed = 77;
        s.size = 100;
        std::ostringstream a, b;
        write_jsonl(a, synth_generate(s));
        write_jsonl(b, synth_generate(s));
        CHECK(a.str() == b.str());
        s.seed = 78;
        std::ostringstream c;
        write_jsonl(c, synth_generate(s));
        CHECK(a.str() != c.str());
    }

    TEST_CASE("invalid specs are rejected") {
        SynthSpec s;
        s.classes = 1;
        CHECK_THROWS_AS(synth_generate(s), InvalidArgument);
        s = SynthSpec{};
        s.size = 5;
        CHECK_THROWS_AS(synth_generate(s), InvalidArgument);
        s = SynthSpec{};
        s.noise = 1.0;
        CHECK_THROWS_AS(synth_generate(s), InvalidArgument);
        CHECK_THROWS_AS(parse_synth_task("copy"), InvalidArgument);
    }
}
