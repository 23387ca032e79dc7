#pragma once

#include <map>
#include <string>
#include <vector>

#include "cascades/core.hpp"
#include "cascades/providers.hpp"

namespace cascades {

struct StandardizedDocument {
    std::string id;
    std::vector<std::string> lines;  // each <= line_width chars, 1-based numbering

    int line_count() const { return static_cast<int>(lines.size()); }
    // "Line #N. <text>" rendering sent to the oracle.
    std::string numbered_text() const;
};

// Greedy hard wrap at `line_width` characters, breaking at the last
// whitespace inside the window when one exists. Newlines are hard breaks.
StandardizedDocument standardize(const Document& doc, int line_width);

// Merge overlapping or adjacent ranges; result sorted, disjoint.
std::vector<LineRange> merge_ranges(std::vector<LineRange> ranges);

// Expand every range by one line on each side, clamped to [1, line_count],
// then re-merge.
std::vector<LineRange> expand_ranges(const std::vector<LineRange>& ranges,
                                     int line_count);

struct GranularityResult {
    int granularity = 1;  // s: chunk size in lines
    int expansions_used = 0;
    // Final merged ranges per document (docs with malformed oracle ranges
    // are absent).
    std::map<std::string, std::vector<LineRange>> ranges;
    std::vector<std::string> dropped_docs;
};

// Oracle-guided granularity search: request minimal line ranges, check
// reduced-document agreement with the full-document answer, expand up to
// e_max times, and set s to the rounded mean merged-range length.
GranularityResult find_granularity(const std::vector<StandardizedDocument>& docs,
                                   const std::map<std::string, ClassLabel>& gold,
                                   Provider& provider, const ModelRef& oracle,
                                   const OperationPrompt& original_op,
                                   double alpha, int e_max);

struct LabeledChunk {
    std::string doc_id;
    int start_line = 1;  // 1-based
    std::string text;    // the s lines joined by '\n'
    bool relevant = false;
};

struct ChunkDataset {
    std::vector<LabeledChunk> train;
    std::vector<LabeledChunk> test;
};

// Relevant = s-line chunk at each oracle range start; irrelevant =
// non-overlapping s-line windows intersecting no relevant chunk.
// Overlapping-but-not-relevant windows are excluded entirely.
std::vector<LabeledChunk> label_chunks(const StandardizedDocument& doc,
                                       const std::vector<LineRange>& oracle_ranges,
                                       int granularity);

ChunkDataset build_training_set(const std::vector<StandardizedDocument>& docs,
                                const std::map<std::string, std::vector<LineRange>>& ranges,
                                int granularity,
                                const std::vector<std::string>& train_doc_ids,
                                const std::vector<std::string>& test_doc_ids);

struct RelevanceModel {
    std::vector<double> weights;
    double bias = 0.0;
    int granularity = 1;
    std::string embedder_name;
    int epochs_trained = 0;
    double best_f1 = 0.0;

    double score(const EmbeddingVector& e) const;  // sigmoid(w.e + b)

    std::string to_json_text() const;
    static RelevanceModel from_json_text(const std::string& text);
};

struct TrainOptions {
    double learning_rate = 1e-2;
    int max_epochs = 200;
    int patience = 10;
};

// Logistic regression on chunk embeddings, weights initialized to the
// embedding of the original operation, relevant class upsampled to 1:1,
// Adam on binary cross-entropy, early stopping on test-split F1.
RelevanceModel train_relevance(const ChunkDataset& data, Provider& provider,
                               const ModelRef& embedder,
                               const OperationPrompt& original_op,
                               int granularity,
                               const TrainOptions& options = {});

struct ScoredChunk {
    int start_line = 1;
    std::vector<std::string> lines;
    double score = 0.0;
};

struct RestructuredDocument {
    std::string id;
    std::vector<ScoredChunk> chunks;  // descending score, ties in doc order
    std::optional<ClassLabel> gold_label;

    PreparedDocument prepared() const;  // flattened line order for execution
};

// Partition into consecutive s-line chunks, score each, stable-sort by
// descending relevance.
RestructuredDocument reorder(const StandardizedDocument& doc,
                             const RelevanceModel& model, Provider& provider,
                             const ModelRef& embedder);

}  // namespace cascades
