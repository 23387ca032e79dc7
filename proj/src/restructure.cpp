#include "cascades/restructure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace cascades {

using nlohmann::json;

std::string StandardizedDocument::numbered_text() const {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        out += "Line #" + std::to_string(i + 1) + ". " + lines[i];
        out += '\n';
    }
    return out;
}

namespace {

void wrap_paragraph(const std::string& text, int width,
                    std::vector<std::string>& out) {
    std::size_t pos = 0;
    const std::size_t w = static_cast<std::size_t>(width);
    while (text.size() - pos > w) {
        // Break at the last whitespace inside the window when one exists;
        // the break character itself is dropped.
        std::size_t brk = text.rfind(' ', pos + w);
        if (brk != std::string::npos && brk > pos) {
            out.push_back(text.substr(pos, brk - pos));
            pos = brk + 1;
        } else {
            out.push_back(text.substr(pos, w));
            pos += w;
        }
    }
    out.push_back(text.substr(pos));
}

}  // namespace

StandardizedDocument standardize(const Document& doc, int line_width) {
    if (doc.text.empty()) throw std::invalid_argument("empty input");
    StandardizedDocument s;
    s.id = doc.id;
    std::istringstream is(doc.text);
    std::string paragraph;
    while (std::getline(is, paragraph)) wrap_paragraph(paragraph, line_width, s.lines);
    if (s.lines.empty()) s.lines.push_back(doc.text);
    return s;
}

std::vector<LineRange> merge_ranges(std::vector<LineRange> ranges) {
    if (ranges.empty()) return ranges;
    std::sort(ranges.begin(), ranges.end(), [](const LineRange& a, const LineRange& b) {
        return a.start_line != b.start_line ? a.start_line < b.start_line
                                            : a.end_line < b.end_line;
    });
    std::vector<LineRange> merged;
    merged.push_back(ranges.front());
    for (std::size_t i = 1; i < ranges.size(); ++i) {
        if (ranges[i].start_line <= merged.back().end_line + 1)  // overlap or adjacent
            merged.back().end_line = std::max(merged.back().end_line, ranges[i].end_line);
        else
            merged.push_back(ranges[i]);
    }
    return merged;
}

std::vector<LineRange> expand_ranges(const std::vector<LineRange>& ranges,
                                     int line_count) {
    std::vector<LineRange> expanded;
    for (const auto& r : ranges)
        expanded.push_back({std::max(1, r.start_line - 1),
                            std::min(line_count, r.end_line + 1)});
    return merge_ranges(expanded);
}

namespace {

std::string reduced_text(const StandardizedDocument& doc,
                         const std::vector<LineRange>& ranges) {
    std::string out;
    for (const auto& r : ranges)
        for (int line = r.start_line; line <= r.end_line; ++line) {
            if (!out.empty()) out += '\n';
            out += doc.lines[static_cast<std::size_t>(line - 1)];
        }
    return out;
}

}  // namespace

GranularityResult find_granularity(const std::vector<StandardizedDocument>& docs,
                                   const std::map<std::string, ClassLabel>& gold,
                                   Provider& provider, const ModelRef& oracle,
                                   const OperationPrompt& original_op,
                                   double alpha, int e_max) {
    GranularityResult result;
    std::vector<const StandardizedDocument*> kept;
    for (const auto& doc : docs) {
        try {
            std::vector<LineRange> ranges =
                provider.relevant_ranges(oracle, doc, original_op);
            for (auto& r : ranges) {
                r.start_line = std::max(1, r.start_line);
                r.end_line = std::min(doc.line_count(), r.end_line);
                if (r.end_line < r.start_line) throw std::runtime_error("bad range");
            }
            if (ranges.empty()) throw std::runtime_error("no ranges");
            result.ranges[doc.id] = merge_ranges(std::move(ranges));
            kept.push_back(&doc);
        } catch (const std::runtime_error&) {
            result.dropped_docs.push_back(doc.id);
        }
    }
    if (kept.empty()) {
        result.granularity = 1;
        return result;
    }

    for (int e = 0;; ++e) {
        long agree = 0;
        for (const auto* doc : kept) {
            ScoreRequest req;
            req.doc_id = doc->id;
            req.fraction = 1.0;
            req.text = reduced_text(*doc, result.ranges[doc->id]);
            req.operation = &original_op;
            req.variant = "reduced:" + std::to_string(e);
            ScoredPrediction p = provider.score(oracle, req);
            if (p.predicted == gold.at(doc->id)) ++agree;
        }
        if (static_cast<double>(agree) >=
                alpha * static_cast<double>(kept.size()) ||
            e >= e_max) {
            result.expansions_used = e;
            break;
        }
        for (const auto* doc : kept)
            result.ranges[doc->id] =
                expand_ranges(result.ranges[doc->id], doc->line_count());
    }

    long total_len = 0, n_ranges = 0;
    for (const auto& [_, ranges] : result.ranges)
        for (const auto& r : ranges) {
            total_len += r.length();
            ++n_ranges;
        }
    result.granularity = std::max(
        1, static_cast<int>(std::lround(static_cast<double>(total_len) /
                                        static_cast<double>(n_ranges))));
    return result;
}

std::vector<LabeledChunk> label_chunks(const StandardizedDocument& doc,
                                       const std::vector<LineRange>& oracle_ranges,
                                       int granularity) {
    const int s = granularity;
    const int n = doc.line_count();
    auto chunk_text = [&](int start, int end) {
        std::string text;
        for (int line = start; line <= end; ++line) {
            if (line > start) text += '\n';
            text += doc.lines[static_cast<std::size_t>(line - 1)];
        }
        return text;
    };

    std::vector<LabeledChunk> out;
    std::vector<LineRange> relevant;
    for (const auto& r : oracle_ranges) {
        int start = r.start_line;
        int end = std::min(n, start + s - 1);
        relevant.push_back({start, end});
        out.push_back({doc.id, start, chunk_text(start, end), true});
    }

    for (int start = 1; start <= n; start += s) {
        int end = std::min(n, start + s - 1);
        bool overlaps = std::any_of(
            relevant.begin(), relevant.end(), [&](const LineRange& r) {
                return start <= r.end_line && r.start_line <= end;
            });
        if (!overlaps) out.push_back({doc.id, start, chunk_text(start, end), false});
    }
    return out;
}

ChunkDataset build_training_set(const std::vector<StandardizedDocument>& docs,
                                const std::map<std::string, std::vector<LineRange>>& ranges,
                                int granularity,
                                const std::vector<std::string>& train_doc_ids,
                                const std::vector<std::string>& test_doc_ids) {
    ChunkDataset data;
    auto collect = [&](const std::vector<std::string>& ids,
                       std::vector<LabeledChunk>& out) {
        for (const auto& id : ids) {
            auto doc_it = std::find_if(docs.begin(), docs.end(),
                                       [&](const auto& d) { return d.id == id; });
            if (doc_it == docs.end()) continue;
            auto range_it = ranges.find(id);
            static const std::vector<LineRange> kNone;
            auto chunks = label_chunks(
                *doc_it, range_it != ranges.end() ? range_it->second : kNone,
                granularity);
            out.insert(out.end(), chunks.begin(), chunks.end());
        }
    };
    collect(train_doc_ids, data.train);
    collect(test_doc_ids, data.test);
    return data;
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double f1_score(const RelevanceModel& model,
                const std::vector<std::pair<EmbeddingVector, bool>>& examples) {
    long tp = 0, fp = 0, fn = 0;
    for (const auto& [e, relevant] : examples) {
        bool predicted = model.score(e) >= 0.5;
        if (predicted && relevant) ++tp;
        else if (predicted && !relevant) ++fp;
        else if (!predicted && relevant) ++fn;
    }
    if (tp == 0) return 0.0;
    double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

double RelevanceModel::score(const EmbeddingVector& e) const {
    if (e.values.size() != weights.size())
        throw std::invalid_argument("embedding dimension mismatch");
    double z = bias;
    for (std::size_t i = 0; i < weights.size(); ++i) z += weights[i] * e.values[i];
    return sigmoid(z);
}

std::string RelevanceModel::to_json_text() const {
    json j;
    j["dim"] = weights.size();
    j["weights"] = weights;
    j["bias"] = bias;
    j["granularity"] = granularity;
    j["embedder_name"] = embedder_name;
    j["epochs_trained"] = epochs_trained;
    j["best_f1"] = best_f1;
    return j.dump();
}

RelevanceModel RelevanceModel::from_json_text(const std::string& text) {
    json j = json::parse(text);
    RelevanceModel m;
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    m.granularity = j.at("granularity").get<int>();
    m.embedder_name = j.value("embedder_name", "");
    m.epochs_trained = j.value("epochs_trained", 0);
    m.best_f1 = j.value("best_f1", 0.0);
    return m;
}

RelevanceModel train_relevance(const ChunkDataset& data, Provider& provider,
                               const ModelRef& embedder,
                               const OperationPrompt& original_op,
                               int granularity, const TrainOptions& options) {
    if (data.train.empty() || data.test.empty())
        throw std::invalid_argument("both chunk splits must be non-empty");

    auto embed_all = [&](const std::vector<LabeledChunk>& chunks) {
        std::vector<std::pair<EmbeddingVector, bool>> out;
        out.reserve(chunks.size());
        for (const auto& c : chunks)
            out.emplace_back(provider.embed(embedder, c.text), c.relevant);
        return out;
    };
    auto train = embed_all(data.train);
    auto test = embed_all(data.test);

    long n_rel = std::count_if(train.begin(), train.end(),
                               [](const auto& e) { return e.second; });
    long n_irr = static_cast<long>(train.size()) - n_rel;
    if (n_rel == 0) throw std::invalid_argument("degenerate training set");

    // Upsample the minority class by duplication to exact 1:1 balance.
    std::vector<std::size_t> sample;  // indices into `train`
    for (std::size_t i = 0; i < train.size(); ++i) sample.push_back(i);
    bool rel_minority = n_rel < n_irr;
    long minority = std::min(n_rel, n_irr), majority = std::max(n_rel, n_irr);
    if (minority > 0 && minority != majority) {
        long deficit = majority - minority;
        std::vector<std::size_t> minority_idx;
        for (std::size_t i = 0; i < train.size(); ++i)
            if (train[i].second == rel_minority) minority_idx.push_back(i);
        for (long k = 0; k < deficit; ++k)
            sample.push_back(minority_idx[static_cast<std::size_t>(k) %
                                          minority_idx.size()]);
    }

    EmbeddingVector init = provider.embed(embedder, original_op.text);
    RelevanceModel model;
    model.weights = init.values;
    model.bias = 0.0;
    model.granularity = granularity;
    model.embedder_name = embedder.name;

    RelevanceModel best = model;
    best.best_f1 = f1_score(model, test);

    // Adam on full-batch binary cross-entropy.
    const std::size_t dim = model.weights.size();
    std::vector<double> m_w(dim, 0.0), v_w(dim, 0.0);
    double m_b = 0.0, v_b = 0.0;
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    int since_best = 0;
    for (int epoch = 1; epoch <= options.max_epochs; ++epoch) {
        std::vector<double> grad_w(dim, 0.0);
        double grad_b = 0.0;
        for (std::size_t idx : sample) {
            const auto& [e, relevant] = train[idx];
            double err = model.score(e) - (relevant ? 1.0 : 0.0);
            for (std::size_t d = 0; d < dim; ++d) grad_w[d] += err * e.values[d];
            grad_b += err;
        }
        const double inv_n = 1.0 / static_cast<double>(sample.size());
        double bc1 = 1.0 - std::pow(beta1, epoch);
        double bc2 = 1.0 - std::pow(beta2, epoch);
        for (std::size_t d = 0; d < dim; ++d) {
            double g = grad_w[d] * inv_n;
            m_w[d] = beta1 * m_w[d] + (1 - beta1) * g;
            v_w[d] = beta2 * v_w[d] + (1 - beta2) * g * g;
            model.weights[d] -= options.learning_rate * (m_w[d] / bc1) /
                                (std::sqrt(v_w[d] / bc2) + eps);
        }
        double g = grad_b * inv_n;
        m_b = beta1 * m_b + (1 - beta1) * g;
        v_b = beta2 * v_b + (1 - beta2) * g * g;
        model.bias -= options.learning_rate * (m_b / bc1) / (std::sqrt(v_b / bc2) + eps);

        double f1 = f1_score(model, test);
        if (f1 > best.best_f1) {
            best = model;
            best.best_f1 = f1;
            best.epochs_trained = epoch;
            since_best = 0;
        } else if (++since_best >= options.patience) {
            break;
        }
    }
    return best;
}

PreparedDocument RestructuredDocument::prepared() const {
    PreparedDocument p;
    p.id = id;
    p.gold_label = gold_label;
    for (const auto& chunk : chunks)
        p.lines.insert(p.lines.end(), chunk.lines.begin(), chunk.lines.end());
    return p;
}

RestructuredDocument reorder(const StandardizedDocument& doc,
                             const RelevanceModel& model, Provider& provider,
                             const ModelRef& embedder) {
    RestructuredDocument out;
    out.id = doc.id;
    const int s = model.granularity;
    const int n = doc.line_count();
    for (int start = 1; start <= n; start += s) {
        ScoredChunk chunk;
        chunk.start_line = start;
        std::string text;
        for (int line = start; line <= std::min(n, start + s - 1); ++line) {
            chunk.lines.push_back(doc.lines[static_cast<std::size_t>(line - 1)]);
            if (!text.empty()) text += '\n';
            text += chunk.lines.back();
        }
        chunk.score = model.score(provider.embed(embedder, text));
        out.chunks.push_back(std::move(chunk));
    }
    std::stable_sort(out.chunks.begin(), out.chunks.end(),
                     [](const ScoredChunk& a, const ScoredChunk& b) {
                         return a.score > b.score;
                     });
    return out;
}

}  // namespace cascades
