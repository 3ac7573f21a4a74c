#include "cli.hpp"

#include "latim/bundle.hpp"
#include "latim/errors.hpp"
#include "latim/eval.hpp"
#include "latim/report_io.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>

namespace latim::cli {

namespace fs = std::filesystem;

namespace {

class usage_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == ',' || ch == ' ' || ch == '\n' || ch == '\t' || ch == '\r') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::vector<int> parse_ids(const std::string& s) {
    std::vector<int> ids;
    for (const auto& item : split_list(s)) {
        try {
            std::size_t used = 0;
            ids.push_back(std::stoi(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw data_error("bad token id '" + item + "'");
        }
    }
    return ids;
}

std::string file_stem(method m) {
    switch (m.kind) {
    case method_kind::lp:
        return m.order == lp_order::l1 ? "lp1" : m.order == lp_order::l2 ? "lp2" : "lpinf";
    default: return to_string(m);
    }
}

std::string fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string layer_label(int layer) { return layer == aggregated_layer ? "aggregated" : std::to_string(layer); }

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!fs::is_directory(dir)) throw data_error("cannot create output directory '" + dir.string() + "'");
}

std::vector<method> parse_methods(const std::vector<std::string>& names) {
    std::vector<method> out;
    for (const auto& n : names) {
        for (const auto& item : split_list(n)) {
            try {
                out.push_back(parse_method(item));
            } catch (const config_error& e) {
                throw usage_error(e.what());
            }
        }
    }
    return out;
}

// Shared token-input flags.
struct token_source {
    std::string inline_ids;
    std::string ids_file;
    int copy_source_len = 0;

    bool is_copy() const { return copy_source_len > 0; }

    std::vector<int> resolve(const model_config& config, std::uint64_t seed) const {
        const int given = (!inline_ids.empty()) + (!ids_file.empty()) + is_copy();
        if (given != 1) throw usage_error("give exactly one of --tokens, --tokens-file, --copy-source-len");
        if (!inline_ids.empty()) return parse_ids(inline_ids);
        if (!ids_file.empty()) return parse_ids(read_text_file(ids_file));
        return gen_copy_batch(1, copy_source_len, config.vocab_size, seed).front().tokens;
    }
};

void check_tokens(std::span<const int> tokens, const model_config& config) {
    if (tokens.empty()) throw data_error("empty token sequence");
    for (std::size_t i = 0; i < tokens.size(); ++i)
        if (tokens[i] < 0 || tokens[i] >= config.vocab_size)
            throw data_error("token id " + std::to_string(tokens[i]) + " at position " + std::to_string(i) +
                             " is outside the vocabulary of size " + std::to_string(config.vocab_size));
}

index_t effective_threshold(index_t length, bool stream) {
    const index_t threshold = stream_threshold_from_env();
    if (length > threshold && !stream)
        throw data_error("sequence length " + std::to_string(length) + " exceeds the dense hidden-attention limit " +
                         std::to_string(threshold) + "; rerun with --stream");
    return threshold;
}

// ---------------------------------------------------------------- gen-model

struct gen_model_args {
    std::string variant_name = "mamba1";
    int layers = 2, dim = 16, inner = 0, state = 4, heads = 1, conv = 4, vocab = 32, dt_rank = 0;
    std::string activation = "silu";
    std::string precision = "f64";
    bool untied = false;
    std::uint64_t seed = 0;
    std::string out;
};

void add_gen_model(CLI::App& app, gen_model_args& a) {
    auto* c = app.add_subcommand("gen-model", "Generate a deterministic random model bundle");
    c->add_option("--variant", a.variant_name, "mamba1 or mamba2")->check(CLI::IsMember({"mamba1", "mamba2"}));
    c->add_option("--layers", a.layers, "Number of residual blocks");
    c->add_option("--dim", a.dim, "Model width D");
    c->add_option("--inner", a.inner, "Inner width E (default 2*D)");
    c->add_option("--state", a.state, "State size R");
    c->add_option("--heads", a.heads, "Mamba-2 head count (must divide E)");
    c->add_option("--conv", a.conv, "Conv kernel width");
    c->add_option("--vocab", a.vocab, "Vocabulary size");
    c->add_option("--dt-rank", a.dt_rank, "Mamba-1 delta rank (default ceil(D/16))");
    c->add_option("--activation", a.activation, "Conv activation / default strategy")
        ->check(CLI::IsMember({"silu", "relu", "identity", "taylor1", "taylor2"}));
    c->add_option("--dtype", a.precision, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}));
    c->add_flag("--untied", a.untied, "Store a separate output head");
    c->add_option("--seed", a.seed, "Weight seed");
    c->add_option("--out", a.out, "Bundle path")->required();
}

int run_gen_model(const gen_model_args& a, std::ostream& out) {
    auto config = model_config::with_defaults(parse_variant(a.variant_name), a.layers, a.dim, a.state, a.conv,
                                              a.heads, a.vocab);
    if (a.inner > 0) config.inner_dim = a.inner;
    if (a.dt_rank > 0) config.dt_rank = a.dt_rank;
    config.strategy = parse_strategy(a.activation);
    config.precision = parse_dtype(a.precision);
    config.tied_head = !a.untied;
    config.validate();
    const auto weights = generate_random_model(config, a.seed);
    save_bundle(weights, config, a.out);
    out << "wrote " << a.out << "\n" << describe(config) << " seed=" << a.seed << "\n";
    return ok;
}

// ---------------------------------------------------------------- decompose

struct decompose_args {
    std::string bundle;
    token_source tokens;
    std::uint64_t seed = 0;
    std::vector<std::string> methods;
    std::string layer = "all";
    std::string strategy;
    std::string targets;
    std::string target_mode = "argmax";
    std::string gold;
    std::string out;
    bool image = false;
    bool stream = false;
};

void add_token_options(CLI::App* c, token_source& t, std::uint64_t& seed) {
    c->add_option("--tokens", t.inline_ids, "Comma-separated token ids");
    c->add_option("--tokens-file", t.ids_file, "File of whitespace/comma-separated token ids");
    c->add_option("--copy-source-len", t.copy_source_len, "Generate one copy-task sequence with this source length");
    c->add_option("--seed", seed, "Seed for generated inputs");
}

void add_decompose(CLI::App& app, decompose_args& a) {
    auto* c = app.add_subcommand("decompose", "Write attribution heatmaps for one sequence");
    c->add_option("--bundle", a.bundle, "Weight bundle")->required();
    add_token_options(c, a.tokens, a.seed);
    c->add_option("--method", a.methods, "lp:1 lp:2 lp:inf alti alti-logit mamba-attention (repeatable)");
    c->add_option("--layer", a.layer, "Layer index, all, aggregated, or best-by:<auc|ap|rk>");
    c->add_option("--strategy", a.strategy, "Decomposition strategy (default: the bundle's)");
    c->add_option("--targets", a.targets, "Comma-separated ids explained by alti-logit, one per position");
    c->add_option("--target-mode", a.target_mode, "argmax or next")->check(CLI::IsMember({"argmax", "next"}));
    c->add_option("--gold", a.gold, "Gold mask CSV for best-by selection on non-copy inputs");
    c->add_option("--out", a.out, "Output directory")->required();
    c->add_flag("--image", a.image, "Also write PNG heatmaps");
    c->add_flag("--stream", a.stream, "Allow streaming hidden attention for long inputs");
}

enum class layer_kind { index, all, aggregated, best_by };

struct layer_selector {
    layer_kind kind = layer_kind::all;
    int index = 0;
    std::string metric;
};

layer_selector parse_layer(const std::string& s, int num_layers) {
    layer_selector sel;
    if (s == "all") return sel;
    if (s == "aggregated") {
        sel.kind = layer_kind::aggregated;
        return sel;
    }
    if (s.rfind("best-by:", 0) == 0) {
        sel.kind = layer_kind::best_by;
        sel.metric = s.substr(8);
        if (sel.metric != "auc" && sel.metric != "ap" && sel.metric != "rk")
            throw usage_error("best-by metric must be auc, ap or rk");
        return sel;
    }
    try {
        std::size_t used = 0;
        sel.index = std::stoi(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
        throw usage_error("bad --layer '" + s + "'");
    }
    if (sel.index < 0 || sel.index >= num_layers)
        throw usage_error("layer " + s + " out of range for a " + std::to_string(num_layers) + "-layer model");
    sel.kind = layer_kind::index;
    return sel;
}

void validate_combination(const std::vector<method>& methods, const layer_selector& sel) {
    for (const auto& m : methods) {
        const bool logit = m.kind == method_kind::alti_logit;
        if (logit && (sel.kind == layer_kind::index || sel.kind == layer_kind::best_by))
            throw usage_error("alti-logit is a cross-layer method; use --layer aggregated or all");
        if (!logit && sel.kind == layer_kind::aggregated)
            throw usage_error(to_string(m) + " is per-layer; --layer aggregated applies to alti-logit only");
    }
}

double selection_score(const copy_scores& s, const std::string& metric) {
    return metric == "auc" ? s.auc : metric == "ap" ? s.ap : s.r_at_k;
}

// Rows of (c, gold) that carry at least one gold entry.
copy_scores score_against_gold(const matrix<double>& c, const binary_mask& gold) {
    std::vector<index_t> rows;
    for (index_t i = 0; i < gold.rows(); ++i)
        if (gold.row(i).any()) rows.push_back(i);
    if (rows.empty()) throw data_error("gold mask has no positive entries");
    matrix<double> block(static_cast<index_t>(rows.size()), c.cols());
    binary_mask g(static_cast<index_t>(rows.size()), c.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        block.row(static_cast<index_t>(k)) = c.row(rows[k]);
        g.row(static_cast<index_t>(k)) = gold.row(rows[k]);
    }
    return score_copy_block(block, g);
}

template <class T>
int run_decompose_typed(const decompose_args& a, const bundle& b, std::ostream& out) {
    const auto& config = b.config;
    const auto weights = b.weights.template cast<T>();
    auto methods = parse_methods(a.methods.empty() ? std::vector<std::string>{"lp:2"} : a.methods);
    const auto sel = parse_layer(a.layer, config.num_layers);
    validate_combination(methods, sel);
    const auto strategy = a.strategy.empty() ? config.strategy : parse_strategy(a.strategy);

    const auto tokens = a.tokens.resolve(config, a.seed);
    check_tokens(tokens, config);
    const auto n = static_cast<index_t>(tokens.size());
    const index_t threshold = effective_threshold(n, a.stream);

    std::optional<binary_mask> gold;
    if (sel.kind == layer_kind::best_by) {
        if (!a.gold.empty()) {
            const auto g = parse_csv(read_text_file(a.gold));
            if (g.values.rows() != n) throw data_error("gold mask size differs from the token sequence");
            gold = g.values.unaryExpr([](double v) { return static_cast<std::uint8_t>(v != 0); });
        } else if (!a.tokens.is_copy()) {
            throw usage_error("best-by needs --gold unless the input comes from --copy-source-len");
        }
    }

    const auto d = decompose<T>(tokens, weights, config, strategy, threshold);
    std::vector<int> targets;
    if (!a.targets.empty()) {
        targets = parse_ids(a.targets);
        if (static_cast<index_t>(targets.size()) != n) throw data_error("--targets needs one id per position");
    } else {
        targets = logit_targets(d.forward, tokens, a.target_mode == "next" ? target_mode::next_token
                                                                              : target_mode::argmax);
    }
    const auto matrices = attribute(d, weights, methods, targets);

    // Pick the per-method best layer when asked.
    std::vector<bool> keep(matrices.size(), true);
    std::vector<std::string> selection_note(matrices.size());
    if (sel.kind == layer_kind::index) {
        for (std::size_t k = 0; k < matrices.size(); ++k) keep[k] = matrices[k].layer == sel.index;
    } else if (sel.kind == layer_kind::best_by) {
        for (const auto& m : methods) {
            std::optional<std::size_t> best;
            double best_score = 0;
            for (std::size_t k = 0; k < matrices.size(); ++k) {
                if (!(matrices[k].tag == m)) continue;
                keep[k] = false;
                const auto s = gold ? score_against_gold(matrices[k].c, *gold)
                                    : score_copy_block(extract_copy_block(matrices[k].c, a.tokens.copy_source_len),
                                                       copy_gold_mask(a.tokens.copy_source_len));
                const double v = selection_score(s, sel.metric);
                selection_note[k] = sel.metric + ":" + format_number(v);
                if (!best || v > best_score) {
                    best = k;
                    best_score = v;
                }
            }
            if (best) keep[*best] = true;
        }
    }

    const fs::path dir(a.out);
    ensure_dir(dir);
    for (std::size_t k = 0; k < matrices.size(); ++k) {
        if (!keep[k]) continue;
        const auto& m = matrices[k];
        csv_matrix csv;
        csv.metadata = {{"method", to_string(m.tag)},
                        {"layer", layer_label(m.layer)},
                        {"strategy", std::string(to_string(strategy))},
                        {"variant", std::string(to_string(config.arch))},
                        {"positions", std::to_string(n)}};
        if (!selection_note[k].empty()) csv.metadata.emplace_back("selected_by", selection_note[k]);
        if (m.tag.kind == method_kind::alti) {
            std::string rows;
            for (std::size_t i = 0; i < m.degenerate_rows.size(); ++i)
                if (m.degenerate_rows[i]) rows += (rows.empty() ? "" : " ") + std::to_string(i);
            csv.metadata.emplace_back("degenerate_rows", rows);
        }
        if (m.tag.kind == method_kind::alti_logit) {
            std::string ids;
            for (int t : targets) ids += (ids.empty() ? "" : " ") + std::to_string(t);
            csv.metadata.emplace_back("targets", ids);
        }
        csv.tokens = tokens;
        csv.values = m.c;
        const std::string stem = file_stem(m.tag) + "_" + (m.layer == aggregated_layer ? std::string("aggregated")
                                                                                        : "layer" + std::to_string(m.layer));
        write_text_file(dir / (stem + ".csv"), to_csv(csv));
        out << "wrote " << (dir / (stem + ".csv")).string() << "\n";
        if (a.image) {
            write_heatmap_png(dir / (stem + ".png"), m.c);
            out << "wrote " << (dir / (stem + ".png")).string() << "\n";
        }
    }
    return ok;
}

int run_decompose(const decompose_args& a, std::ostream& out) {
    const auto b = load_bundle(a.bundle);
    return b.config.precision == dtype::f32 ? run_decompose_typed<float>(a, b, out)
                                            : run_decompose_typed<double>(a, b, out);
}

// ---------------------------------------------------------------- eval-copy

struct eval_copy_args {
    std::string bundle;
    int samples = 8;
    int source_len = default_copy_source_len;
    std::uint64_t seed = 0;
    std::vector<std::string> methods;
    std::string strategy;
    std::string target_mode = "argmax";
    std::string scores_csv;
    std::string out;
    bool stream = false;
};

void add_eval_copy(CLI::App& app, eval_copy_args& a) {
    auto* c = app.add_subcommand("eval-copy", "Score attribution methods on the copying task");
    c->add_option("--bundle", a.bundle, "Weight bundle");
    c->add_option("--samples", a.samples, "Number of copy instances");
    c->add_option("--source-len", a.source_len, "Source string length S");
    c->add_option("--seed", a.seed, "Seed for the copy batch");
    c->add_option("--method", a.methods, "Methods to score (default: all)");
    c->add_option("--strategy", a.strategy, "Decomposition strategy (default: the bundle's)");
    c->add_option("--target-mode", a.target_mode, "argmax or next")->check(CLI::IsMember({"argmax", "next"}));
    c->add_option("--scores-from-csv", a.scores_csv, "Score a precomputed (2S+1)x(2S+1) attribution CSV instead");
    c->add_option("--out", a.out, "Output directory")->required();
    c->add_flag("--stream", a.stream, "Allow streaming hidden attention for long inputs");
}

const char* eval_metadata =
    "# aggregation=auc and ap over the flattened SxS copy block; r@k per copy row with k = gold count\n"
    "# rows=position S+i predicts copy token i; gold=|source - i| <= 1\n";

void write_eval_reports(const fs::path& dir, const std::vector<faithfulness_report>& reports, std::ostream& out,
                        const std::string& extra_meta) {
    ensure_dir(dir);
    std::ostringstream csv, txt, samples;
    csv << eval_metadata << extra_meta << "method,layer,auc,ap,r_at_k,samples\n";
    samples << eval_metadata << extra_meta << "method,layer,sample,auc,ap,r_at_k\n";
    txt << pad("method", 18) << pad("layer", 12) << pad("AUC", 9) << pad("AP", 9) << "R@K\n";
    for (const auto& r : reports) {
        const auto m = to_string(r.tag);
        const auto l = layer_label(r.layer);
        csv << m << "," << l << "," << format_number(r.auc) << "," << format_number(r.ap) << ","
            << format_number(r.r_at_k) << "," << r.per_sample.size() << "\n";
        txt << pad(m, 18) << pad(l, 12) << pad(fixed(r.auc), 9) << pad(fixed(r.ap), 9) << fixed(r.r_at_k) << "\n";
        for (std::size_t s = 0; s < r.per_sample.size(); ++s) {
            const auto& p = r.per_sample[s];
            samples << m << "," << l << "," << s << "," << format_number(p.auc) << "," << format_number(p.ap) << ","
                    << format_number(p.r_at_k) << "\n";
        }
    }
    write_text_file(dir / "faithfulness.csv", csv.str());
    write_text_file(dir / "faithfulness.txt", txt.str());
    write_text_file(dir / "faithfulness_samples.csv", samples.str());
    out << txt.str();
}

template <class T>
std::vector<faithfulness_report> eval_typed(const eval_copy_args& a, const bundle& b,
                                            const std::vector<method>& methods, index_t threshold) {
    const auto weights = b.weights.template cast<T>();
    const auto batch = gen_copy_batch(a.samples, a.source_len, b.config.vocab_size, a.seed);
    const auto strategy = a.strategy.empty() ? b.config.strategy : parse_strategy(a.strategy);
    return evaluate_copy<T>(weights, b.config, batch, methods, strategy,
                            a.target_mode == "next" ? target_mode::next_token : target_mode::argmax, threshold);
}

int run_eval_copy(const eval_copy_args& a, std::ostream& out) {
    if (!a.scores_csv.empty()) {
        const auto m = parse_csv(read_text_file(a.scores_csv));
        const auto n = m.values.rows();
        if (n < 3 || n % 2 == 0) throw data_error("scores CSV must be (2S+1) x (2S+1)");
        const int s = static_cast<int>((n - 1) / 2);
        faithfulness_report r;
        r.tag = m.meta("method").empty() ? method{method_kind::lp, lp_order::l2} : parse_method(m.meta("method"));
        const auto layer = m.meta("layer");
        r.layer = layer.empty() || layer == "aggregated" ? aggregated_layer : std::stoi(layer);
        const auto scores = score_copy_block(extract_copy_block(m.values, s), copy_gold_mask(s));
        r.auc = scores.auc;
        r.ap = scores.ap;
        r.r_at_k = scores.r_at_k;
        r.per_sample.push_back(scores);
        write_eval_reports(a.out, {r}, out, "# source=" + fs::path(a.scores_csv).filename().string() + "\n");
        return ok;
    }
    if (a.bundle.empty()) throw usage_error("eval-copy needs --bundle or --scores-from-csv");
    if (a.samples < 1) throw usage_error("--samples must be >= 1");
    const auto methods = parse_methods(a.methods.empty() ? std::vector<std::string>{"lp:1", "lp:2", "lp:inf", "alti",
                                                                                      "alti-logit", "mamba-attention"}
                                                         : a.methods);
    const index_t threshold = effective_threshold(2 * static_cast<index_t>(a.source_len) + 1, a.stream);
    const auto b = load_bundle(a.bundle);
    const auto reports = b.config.precision == dtype::f32 ? eval_typed<float>(a, b, methods, threshold)
                                                          : eval_typed<double>(a, b, methods, threshold);
    std::ostringstream meta;
    meta << "# samples=" << a.samples << "\n# source_len=" << a.source_len << "\n# seed=" << a.seed
         << "\n# target_mode=" << a.target_mode << "\n";
    write_eval_reports(a.out, reports, out, meta.str());
    return ok;
}

// ---------------------------------------------------------------- approx-error

struct approx_error_args {
    std::string bundle;
    token_source tokens;
    int samples = 4;
    int source_len = 16;
    std::uint64_t seed = 0;
    std::string strategies = "silu,relu,identity,taylor1,taylor2";
    std::string out;
    bool stream = false;
};

void add_approx_error(CLI::App& app, approx_error_args& a) {
    auto* c = app.add_subcommand("approx-error", "Per-layer reconstruction error for each activation strategy");
    c->add_option("--bundle", a.bundle, "Weight bundle")->required();
    c->add_option("--tokens", a.tokens.inline_ids, "Comma-separated token ids (instead of a copy batch)");
    c->add_option("--tokens-file", a.tokens.ids_file, "File of token ids (instead of a copy batch)");
    c->add_option("--samples", a.samples, "Copy-task sequences to average over");
    c->add_option("--source-len", a.source_len, "Copy-task source length");
    c->add_option("--seed", a.seed, "Seed for the copy batch");
    c->add_option("--strategies", a.strategies, "Comma-separated strategies");
    c->add_option("--out", a.out, "Output directory")->required();
    c->add_flag("--stream", a.stream, "Allow streaming hidden attention for long inputs");
}

template <class T>
approx_error_table sweep_typed(const bundle& b, const std::vector<std::vector<int>>& batch,
                               const std::vector<activation_strategy>& strategies, index_t threshold) {
    return approx_error_sweep<T>(b.weights.template cast<T>(), b.config, batch, strategies, threshold);
}

int run_approx_error(const approx_error_args& a, std::ostream& out) {
    std::vector<activation_strategy> strategies;
    for (const auto& s : split_list(a.strategies)) {
        try {
            strategies.push_back(parse_strategy(s));
        } catch (const config_error& e) {
            throw usage_error(e.what());
        }
    }
    if (strategies.empty()) throw usage_error("--strategies is empty");
    const auto b = load_bundle(a.bundle);
    std::vector<std::vector<int>> batch;
    if (!a.tokens.inline_ids.empty() || !a.tokens.ids_file.empty()) {
        batch.push_back(a.tokens.resolve(b.config, a.seed));
    } else {
        if (a.samples < 1) throw usage_error("--samples must be >= 1");
        for (auto& inst : gen_copy_batch(a.samples, a.source_len, b.config.vocab_size, a.seed))
            batch.push_back(std::move(inst.tokens));
    }
    index_t longest = 0;
    for (const auto& seq : batch) {
        check_tokens(seq, b.config);
        longest = std::max(longest, static_cast<index_t>(seq.size()));
    }
    const index_t threshold = effective_threshold(longest, a.stream);
    const auto table = b.config.precision == dtype::f32 ? sweep_typed<float>(b, batch, strategies, threshold)
                                                        : sweep_typed<double>(b, batch, strategies, threshold);

    const fs::path dir(a.out);
    ensure_dir(dir);
    std::ostringstream csv, txt;
    csv << "# metric=mean over tokens of ||sum_j T_i(x_j) + offset - y_i||_2, averaged over " << batch.size()
        << " sequences\n# variant=" << to_string(b.config.arch) << "\nstrategy";
    txt << pad("strategy", 10);
    for (const auto& bucket : table.buckets) {
        csv << ",layer " << bucket;
        txt << pad(bucket, 12);
    }
    csv << "\n";
    txt << "\n";
    for (std::size_t s = 0; s < table.strategies.size(); ++s) {
        const std::string name(to_string(table.strategies[s]));
        csv << name;
        txt << pad(name, 10);
        for (double v : table.per_bucket[s]) {
            csv << "," << format_number(v);
            txt << pad(fixed(v, 6), 12);
        }
        csv << "\n";
        txt << "\n";
    }
    write_text_file(dir / "approx_error.csv", csv.str());
    write_text_file(dir / "approx_error.txt", txt.str());
    out << txt.str();
    return ok;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Token-level attribution toolkit for Mamba-1/Mamba-2 models", "latim"};
    app.require_subcommand(1);
    gen_model_args gen;
    decompose_args dec;
    eval_copy_args eval;
    approx_error_args approx;
    add_gen_model(app, gen);
    add_decompose(app, dec);
    add_eval_copy(app, eval);
    add_approx_error(app, approx);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return usage;
    }

    try {
        if (app.got_subcommand("gen-model")) return run_gen_model(gen, out);
        if (app.got_subcommand("decompose")) return run_decompose(dec, out);
        if (app.got_subcommand("eval-copy")) return run_eval_copy(eval, out);
        if (app.got_subcommand("approx-error")) return run_approx_error(approx, out);
    } catch (const usage_error& e) {
        err << "usage error: " << e.what() << "\n";
        return usage;
    } catch (const config_error& e) {
        err << "config error: " << e.what() << "\n";
        return data;
    } catch (const numeric_error& e) {
        err << "numeric error: " << e.what() << "\n";
        return numeric;
    } catch (const data_error& e) {
        err << "error: " << e.what() << "\n";
        return data;
    }
    return usage;
}

} // namespace latim::cli
