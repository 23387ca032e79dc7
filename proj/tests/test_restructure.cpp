#include <algorithm>

#include "cascades/restructure.hpp"
#include "doctest.h"

using namespace cascades;

TEST_CASE("standardize wraps at the width, breaking at whitespace") {
    Document d{"d", "aaaa bbbb cccc dddd", std::nullopt};
    StandardizedDocument s = standardize(d, 20);
    CHECK(s.lines == std::vector<std::string>{"aaaa bbbb cccc dddd"});

    StandardizedDocument wrapped = standardize(d, 10);
    CHECK(wrapped.lines == std::vector<std::string>{"aaaa bbbb", "cccc dddd"});

    Document unbroken{"d", std::string(25, 'x'), std::nullopt};
    StandardizedDocument hard = standardize(unbroken, 20);
    CHECK(hard.lines == std::vector<std::string>{std::string(20, 'x'),
                                                 std::string(5, 'x')});

    Document multi{"d", "first\nsecond paragraph", std::nullopt};
    CHECK(standardize(multi, 30).lines ==
          std::vector<std::string>{"first", "second paragraph"});

    Document empty{"d", "", std::nullopt};
    CHECK_THROWS_WITH_AS(standardize(empty, 20), "empty input",
                         std::invalid_argument);
}

TEST_CASE("numbered rendering is 'Line #N. <text>'") {
    StandardizedDocument s;
    s.id = "d";
    s.lines = {"alpha", "beta"};
    CHECK(s.numbered_text() == "Line #1. alpha\nLine #2. beta\n");
}

TEST_CASE("merge joins overlapping and adjacent ranges") {
    auto merged = merge_ranges({{5, 8}, {1, 3}, {4, 4}, {10, 12}});
    // [1,3] + adjacent [4,4] + adjacent [5,8] coalesce; [10,12] is separate.
    CHECK(merged == std::vector<LineRange>{{1, 8}, {10, 12}});
    CHECK(merge_ranges({}).empty());
    CHECK(merge_ranges({{2, 6}, {3, 4}}) == std::vector<LineRange>{{2, 6}});
}

TEST_CASE("worked example: two expansions merge [23,25],[28,30] into [21,32]") {
    std::vector<LineRange> ranges = {{23, 25}, {28, 30}};
    ranges = expand_ranges(ranges, 100);  // [22,26] + [27,31] -> adjacent
    CHECK(ranges == std::vector<LineRange>{{22, 31}});
    ranges = expand_ranges(ranges, 100);
    CHECK(ranges == std::vector<LineRange>{{21, 32}});
    CHECK(ranges[0].length() == 12);
}

TEST_CASE("expansion clamps to the document bounds") {
    CHECK(expand_ranges({{1, 2}}, 3) == std::vector<LineRange>{{1, 3}});
}

TEST_CASE("granularity search stops once the oracle agrees on reductions") {
    // 10-line docs; planted answer on lines 4-5.
    std::vector<StandardizedDocument> docs;
    std::map<std::string, ClassLabel> gold;
    for (int i = 0; i < 2; ++i) {
        StandardizedDocument d;
        d.id = "d" + std::to_string(i);
        for (int l = 1; l <= 10; ++l) d.lines.push_back("line " + std::to_string(l));
        docs.push_back(d);
        gold[d.id] = "True";
    }
    std::string fixture = R"({
      "score": [{"dist": {"True": 1.0, "False": 0.0}}],
      "ranges": {"d0": [[4, 5]], "d1": [[4, 5]]}
    })";
    ScriptedProvider provider = ScriptedProvider::from_json_text(fixture);
    ModelRef oracle{"oracle", ModelRole::oracle, {}};
    OperationPrompt op;
    op.id = "op";
    op.output_classes = {"True", "False"};

    GranularityResult g = find_granularity(docs, gold, provider, oracle, op, 0.9, 3);
    CHECK(g.expansions_used == 0);  // immediate agreement
    CHECK(g.granularity == 2);      // mean merged-range length
    CHECK(g.dropped_docs.empty());
    CHECK(g.ranges.at("d0") == std::vector<LineRange>{{4, 5}});
}

TEST_CASE("granularity search expands ranges until agreement") {
    std::vector<StandardizedDocument> docs(1);
    docs[0].id = "d0";
    for (int l = 1; l <= 10; ++l) docs[0].lines.push_back("row " + std::to_string(l));
    std::map<std::string, ClassLabel> gold{{"d0", "True"}};
    // Reduced checks disagree at expansion 0, agree from expansion 1 on.
    std::string fixture = R"({
      "score": [
        {"variant": "reduced:0", "dist": {"True": 0.0, "False": 1.0}},
        {"dist": {"True": 1.0, "False": 0.0}}
      ],
      "ranges": {"d0": [[5, 5]]}
    })";
    ScriptedProvider provider = ScriptedProvider::from_json_text(fixture);
    ModelRef oracle{"oracle", ModelRole::oracle, {}};
    OperationPrompt op;
    op.id = "op";
    op.output_classes = {"True", "False"};

    GranularityResult g = find_granularity(docs, gold, provider, oracle, op, 0.9, 3);
    CHECK(g.expansions_used == 1);
    CHECK(g.ranges.at("d0") == std::vector<LineRange>{{4, 6}});
    CHECK(g.granularity == 3);
}

TEST_CASE("docs with missing oracle ranges are dropped, not fatal") {
    std::vector<StandardizedDocument> docs(2);
    docs[0].id = "has";
    docs[0].lines = {"a", "b"};
    docs[1].id = "missing";
    docs[1].lines = {"a", "b"};
    std::map<std::string, ClassLabel> gold{{"has", "True"}, {"missing", "True"}};
    std::string fixture = R"({
      "score": [{"dist": {"True": 1.0, "False": 0.0}}],
      "ranges": {"has": [[1, 1]]}
    })";
    ScriptedProvider provider = ScriptedProvider::from_json_text(fixture);
    ModelRef oracle{"oracle", ModelRole::oracle, {}};
    OperationPrompt op;
    op.id = "op";
    op.output_classes = {"True", "False"};
    GranularityResult g = find_granularity(docs, gold, provider, oracle, op, 0.9, 3);
    CHECK(g.ranges.count("has") == 1);
    CHECK(g.dropped_docs == std::vector<std::string>{"missing"});
}

TEST_CASE("chunk labeling separates relevant starts from clean windows") {
    StandardizedDocument d;
    d.id = "d";
    for (int l = 1; l <= 9; ++l) d.lines.push_back("L" + std::to_string(l));
    auto chunks = label_chunks(d, {{4, 5}}, 2);
    // Relevant chunk at lines 4-5; windows 1-2, 7-8, 9 are clean; window
    // 3-4 and 5-6 overlap the relevant chunk and are excluded.
    REQUIRE(chunks.size() == 4);
    CHECK(chunks[0].relevant);
    CHECK(chunks[0].start_line == 4);
    CHECK(chunks[0].text == "L4\nL5");
    std::vector<int> clean;
    for (std::size_t i = 1; i < chunks.size(); ++i) {
        CHECK_FALSE(chunks[i].relevant);
        clean.push_back(chunks[i].start_line);
    }
    CHECK(clean == std::vector<int>{1, 7, 9});
}

TEST_CASE("relevance model JSON round-trips") {
    RelevanceModel m;
    m.weights = {0.25, -1.5, 3.0};
    m.bias = 0.125;
    m.granularity = 4;
    m.embedder_name = "emb";
    m.epochs_trained = 17;
    m.best_f1 = 0.75;
    RelevanceModel back = RelevanceModel::from_json_text(m.to_json_text());
    CHECK(back.weights == m.weights);
    CHECK(back.bias == m.bias);
    CHECK(back.granularity == 4);
    CHECK(back.embedder_name == "emb");
    CHECK(back.epochs_trained == 17);
    CHECK(back.best_f1 == 0.75);
    CHECK(m.to_json_text() == back.to_json_text());
}

TEST_CASE("classifier learns a planted keyword and reorders it first") {
    // Docs where relevant chunks contain "needle"; the scripted embedder
    // plants coordinate 0 = 1.0 for that token.
    std::string fixture = R"({
      "dimension": 6,
      "embed_keywords": [{"token": "needle", "coord": 0}]
    })";
    ScriptedProvider provider = ScriptedProvider::from_json_text(fixture);
    ModelRef embedder{"emb", ModelRole::embedder, {}};
    OperationPrompt op;
    op.id = "op";
    op.text = "find the needle";

    ChunkDataset data;
    for (int i = 0; i < 30; ++i) {
        LabeledChunk rel{"d", 1, "the needle is here " + std::to_string(i), true};
        LabeledChunk irr{"d", 3, "plain hay stack " + std::to_string(i), false};
        auto& split = i < 20 ? data.train : data.test;
        split.push_back(rel);
        split.push_back(irr);
    }
    RelevanceModel model = train_relevance(data, provider, embedder, op, 2);
    CHECK(model.best_f1 >= 0.9);
    CHECK(model.granularity == 2);
    CHECK(model.embedder_name == "emb");

    StandardizedDocument doc;
    doc.id = "d";
    doc.lines = {"hay one", "hay two", "the needle sits here", "hay three",
                 "hay four", "hay five"};
    RestructuredDocument r = reorder(doc, model, provider, embedder);
    REQUIRE(r.chunks.size() == 3);
    CHECK(r.chunks[0].start_line == 3);  // needle chunk promoted to the front
    PreparedDocument p = r.prepared();
    CHECK(p.lines.front() == "the needle sits here");
    CHECK(p.lines.size() == 6);
}

TEST_CASE("training requires relevant examples in both splits") {
    ScriptedProvider provider = ScriptedProvider::from_json_text("{}");
    ModelRef embedder{"emb", ModelRole::embedder, {}};
    OperationPrompt op;
    op.id = "op";
    op.text = "t";
    ChunkDataset data;
    data.train.push_back({"d", 1, "text", false});
    data.test.push_back({"d", 1, "text", false});
    CHECK_THROWS(train_relevance(data, provider, embedder, op, 1));
}

TEST_CASE("reorder is a stable sort on equal scores") {
    RelevanceModel flat;
    flat.weights = std::vector<double>(6, 0.0);
    flat.bias = 0.0;
    flat.granularity = 1;
    ScriptedProvider provider = ScriptedProvider::from_json_text(R"({"dimension": 6})");
    ModelRef embedder{"emb", ModelRole::embedder, {}};
    StandardizedDocument doc;
    doc.id = "d";
    doc.lines = {"a", "b", "c"};
    RestructuredDocument r = reorder(doc, flat, provider, embedder);
    CHECK(r.chunks[0].start_line == 1);
    CHECK(r.chunks[1].start_line == 2);
    CHECK(r.chunks[2].start_line == 3);
}
