#include "abstain/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "abstain/backend.hpp"
#include "abstain/engine.hpp"
#include "abstain/errors.hpp"
#include "abstain/jsonl.hpp"
#include "abstain/judge.hpp"
#include "abstain/metrics.hpp"
#include "abstain/prompt.hpp"
#include "abstain/remote.hpp"
#include "abstain/testbed.hpp"
#include "abstain/util.hpp"

namespace abstain::cli {

namespace {

constexpr double kInfSentinel = 1e300;  // serialized stand-in for +inf thresholds

std::string_view variant_name(entropy_variant v) {
    switch (v) {
        case entropy_variant::first_token: return "first-token";
        case entropy_variant::average: return "average";
        case entropy_variant::max: return "max";
        case entropy_variant::min: return "min";
    }
    return "?";
}

entropy_variant parse_variant(const std::string& name) {
    if (name == "first-token") return entropy_variant::first_token;
    if (name == "average") return entropy_variant::average;
    if (name == "max") return entropy_variant::max;
    if (name == "min") return entropy_variant::min;
    throw invalid_argument_error("unknown entropy variant: " + name);
}

calibration_form parse_calibration(const std::string& name) {
    if (name == "reduction") return calibration_form::reduction;
    if (name == "as-printed") return calibration_form::as_printed;
    throw invalid_argument_error("unknown calibration form: " + name);
}

std::string resolve_backend_spec(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv(backend_env_var); env && *env) return env;
    throw invalid_argument_error(std::string("no backend: pass --backend or set ") +
                                 backend_env_var);
}

std::unique_ptr<lm_backend> open_backend(const std::string& spec, const std::string& vocab_path) {
    if (spec.rfind("mock:", 0) == 0) {
        return std::make_unique<table_lm>(table_lm::from_file(spec.substr(5)));
    }
    if (spec.rfind("remote:", 0) == 0) {
        std::optional<vocabulary> vocab;
        if (!vocab_path.empty()) {
            // reuse the mock file schema for the token table
            table_lm table = table_lm::from_file(vocab_path);
            vocab = table.vocab();
        }
        return std::make_unique<remote_lm>(http_transport(spec.substr(7)), std::move(vocab));
    }
    throw invalid_argument_error("backend spec must be mock:<file> or remote:<endpoint>, got: " +
                                 spec);
}

data_split parse_split(const std::string& name) {
    if (name == "train") return data_split::train;
    if (name == "eval") return data_split::eval;
    throw invalid_argument_error("split must be train or eval, got: " + name);
}

struct ingest_stats {
    int64_t lines = 0;
    int64_t over_limit = 0;
};

// Native records carry {id, question, answer, context, split}; MRQA-style
// lines ({context, qas: [...]}) are flattened onto the same schema.
std::vector<qa_record> load_qa_records(const std::string& path, data_split default_split,
                                       int question_word_limit, int answer_word_limit,
                                       ingest_stats* stats = nullptr) {
    std::vector<qa_record> out;
    ingest_stats local;
    ingest_stats& st = stats ? *stats : local;
    for (const auto& j : jsonl::read_records(path)) {
        if (j.contains("type") && j["type"] != "qa") {
            if (j["type"] == "header") continue;
        }
        std::vector<qa_record> batch;
        if (j.contains("qas")) {
            const std::string context = j.at("context").get<std::string>();
            for (const auto& qa : j.at("qas")) {
                qa_record rec;
                rec.id = qa.contains("qid") ? qa.at("qid").get<std::string>()
                                            : qa.at("id").get<std::string>();
                rec.question = qa.at("question").get<std::string>();
                const auto& answers = qa.at("answers");
                if (answers.empty()) continue;
                rec.answer = answers.at(0).get<std::string>();
                rec.context = context;
                rec.split = default_split;
                batch.push_back(std::move(rec));
            }
        } else {
            qa_record rec;
            rec.id = j.at("id").get<std::string>();
            rec.question = j.at("question").get<std::string>();
            rec.answer = j.at("answer").get<std::string>();
            rec.context = j.at("context").get<std::string>();
            rec.split = j.contains("split") ? parse_split(j.at("split").get<std::string>())
                                            : default_split;
            batch.push_back(std::move(rec));
        }
        for (auto& rec : batch) {
            ++st.lines;
            if (split_words(rec.question).size() > static_cast<size_t>(question_word_limit) ||
                split_words(rec.answer).size() > static_cast<size_t>(answer_word_limit)) {
                ++st.over_limit;
                continue;
            }
            out.push_back(std::move(rec));
        }
    }
    return out;
}

std::vector<testbed_record> load_testbed(const std::string& path, std::string* dataset_label,
                                         uint64_t* seed) {
    std::vector<testbed_record> out;
    for (const auto& j : jsonl::read_records(path)) {
        const std::string type = j.value("type", "testbed");
        if (type == "header") {
            if (dataset_label && j.contains("dataset")) *dataset_label = j["dataset"];
            if (seed && j.contains("seed")) *seed = j["seed"].get<uint64_t>();
            continue;
        }
        if (type != "testbed") continue;
        testbed_record rec;
        rec.id = j.at("id").get<std::string>();
        rec.question = j.at("question").get<std::string>();
        rec.context_pos = j.at("context_pos").get<std::string>();
        rec.context_neg = j.at("context_neg").get<std::string>();
        rec.answer = j.at("answer").get<std::string>();
        rec.p = j.at("p").get<int>();
        rec.consistency_p = j.value("consistency_p", 0.0);
        rec.consistency_c_pos = j.value("consistency_c_pos", 0.0);
        rec.candidate_rank = j.value("candidate_rank", 0);
        out.push_back(std::move(rec));
    }
    if (out.empty()) throw data_error("no testbed records in " + path);
    return out;
}

std::string dataset_stem(const std::string& path) {
    return std::filesystem::path(path).stem().string();
}

jsonl::object make_header(const std::string& command, uint64_t seed, const std::string& config,
                          const std::string& dataset, const std::string& strategy = "") {
    jsonl::object h;
    h.put("type", "header");
    h.put("tool", "abstain-decode");
    h.put("command", command);
    h.put("seed", seed);
    if (!dataset.empty()) h.put("dataset", dataset);
    if (!strategy.empty()) h.put("strategy", strategy);
    h.put("config", config);
    h.put("config_hash", to_hex16(fnv1a64(config)));
    return h;
}

template_set load_templates(const std::string& path) {
    if (path.empty()) return template_set();
    return template_set::from_file(path);
}

abstention_phrases load_phrases(const std::string& path) {
    if (path.empty()) return abstention_phrases();
    return abstention_phrases::from_file(path);
}

// ---------------------------------------------------------------- build-testbed

struct build_args {
    std::string input;
    std::string out;
    std::string backend_spec;
    std::string templates_path;
    std::string default_split = "eval";
    uint64_t seed = 0;
    build_config cfg;
    int embed_dim = 64;
};

int cmd_build_testbed(const build_args& args) {
    auto backend = open_backend(resolve_backend_spec(args.backend_spec), "");
    const template_set templates = load_templates(args.templates_path);
    build_config cfg = args.cfg;
    cfg.seed = args.seed;

    ingest_stats ingest;
    const std::vector<qa_record> records =
        load_qa_records(args.input, parse_split(args.default_split), cfg.question_word_limit,
                        cfg.answer_word_limit, &ingest);

    hashed_bow_embedder embedder(static_cast<size_t>(args.embed_dim));
    attrition_report at;
    const std::vector<testbed_record> testbed =
        build_testbed(records, *backend, templates, embedder, cfg, &at);

    std::ostringstream config;
    config << "command=build-testbed input=" << args.input << " seed=" << args.seed
           << " samples=" << cfg.n << " temperature=" << jsonl::format_double(cfg.temperature)
           << " eta=" << jsonl::format_double(cfg.eta) << " span_words=" << cfg.span_words
           << " candidate_cap=" << cfg.candidate_cap << " max_tokens=" << cfg.max_tokens
           << " embed_dim=" << args.embed_dim;

    jsonl::writer writer(args.out);
    writer.line(make_header("build-testbed", args.seed, config.str(), dataset_stem(args.input)));

    jsonl::object attr;
    attr.put("type", "attrition");
    attr.put("ingested", ingest.lines);
    attr.put("over_word_limit", ingest.over_limit);
    attr.put("input_records", at.input_records);
    attr.put("eval_records", at.eval_records);
    attr.put("no_span", at.no_span);
    attr.put("span_candidates", at.span_candidates);
    attr.put("parametric_discarded", at.parametric_discarded);
    attr.put("context_not_relevant", at.context_not_relevant);
    attr.put("no_irrelevant_candidate", at.no_irrelevant_candidate);
    attr.put("surviving", at.surviving);
    attr.put("balanced", at.balanced);
    writer.line(attr);

    for (const auto& rec : testbed) {
        jsonl::object o;
        o.put("type", "testbed");
        o.put("id", rec.id);
        o.put("question", rec.question);
        o.put("context_pos", rec.context_pos);
        o.put("context_neg", rec.context_neg);
        o.put("answer", rec.answer);
        o.put("p", rec.p);
        o.put("consistency_p", rec.consistency_p);
        o.put("consistency_c_pos", rec.consistency_c_pos);
        o.put("candidate_rank", rec.candidate_rank);
        writer.line(o);
    }
    writer.commit();

    std::cout << "wrote " << testbed.size() << " testbed records to " << args.out << "\n"
              << "attrition: eval=" << at.eval_records << " no_span=" << at.no_span
              << " spans=" << at.span_candidates
              << " parametric_discarded=" << at.parametric_discarded
              << " context_not_relevant=" << at.context_not_relevant
              << " no_irrelevant_candidate=" << at.no_irrelevant_candidate
              << " surviving=" << at.surviving << " balanced=" << at.balanced << "\n";
    return 0;
}

// ---------------------------------------------------------------------- decode

struct decode_args {
    std::string testbed;
    std::string out;
    std::string trace_out;
    std::string backend_spec;
    std::string vocab_path;
    std::string templates_path;
    std::string phrases_path;
    std::string demos_path;
    std::string strategy = "cda";
    uint64_t seed = 0;
    int demo_count = 2;
    bool null_demos = true;
    bool resume = false;
    int jobs = 1;
    strategy_config cfg;
};

std::vector<demo> pick_demos(const std::string& path, int count, uint64_t seed,
                             const build_config& limits) {
    if (path.empty() || count <= 0) return {};
    std::vector<qa_record> pool = load_qa_records(path, data_split::train,
                                                  limits.question_word_limit,
                                                  limits.answer_word_limit);
    std::vector<qa_record> train;
    for (auto& rec : pool) {
        if (rec.split == data_split::train) train.push_back(std::move(rec));
    }
    if (train.empty()) train = std::move(pool);
    if (train.empty()) throw data_error("demo file has no usable records: " + path);

    std::vector<size_t> idx(train.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rng64 rng(derive_seed(seed, "demos", "pick"));
    rng.shuffle(idx);

    std::vector<demo> out;
    for (size_t i = 0; i < idx.size() && out.size() < static_cast<size_t>(count); ++i) {
        const auto& rec = train[idx[i]];
        out.push_back(demo{rec.question, rec.context, rec.answer});
    }
    return out;
}

void write_prediction(jsonl::writer& writer, const eval_instance& inst, const prediction& pred) {
    jsonl::object o;
    o.put("type", "prediction");
    o.put("id", inst.id);
    o.put("text", pred.text);
    o.put("abstained", pred.abstained);
    o.put("inference_calls", pred.inference_calls);
    writer.line(o);
}

void write_trace(jsonl::writer& writer, const eval_instance& inst, const prediction& pred) {
    for (const auto& tr : pred.trace) {
        jsonl::object o;
        o.put("type", "trace");
        o.put("id", inst.id);
        o.put("step", tr.step);
        o.put("token", tr.token);
        o.put_opt("h_p", tr.h_p);
        o.put_opt("h_c", tr.h_c);
        o.put_opt("h_a", tr.h_a);
        o.put_opt("h_null_p", tr.h_null_p);
        o.put_opt("h_null_c", tr.h_null_c);
        o.put_opt("r_p", tr.r_p);
        o.put_opt("r_c", tr.r_c);
        if (tr.weights) {
            o.put("w_p", tr.weights->w_p);
            o.put("w_c", tr.weights->w_c);
            o.put("w_a", tr.weights->w_a);
        }
        writer.line(o);
    }
}

int cmd_decode(const decode_args& args) {
    const auto strategy = parse_strategy(args.strategy);
    if (!strategy) throw invalid_argument_error("unknown strategy: " + args.strategy);
    strategy_config cfg = args.cfg;
    cfg.strategy = *strategy;
    if (cfg.max_tokens < 1) throw invalid_argument_error("max_tokens must be >= 1");

    auto backend = open_backend(resolve_backend_spec(args.backend_spec), args.vocab_path);
    template_set templates = load_templates(args.templates_path);
    templates.null_prompts_keep_demos = args.null_demos;
    const abstention_phrases phrases = load_phrases(args.phrases_path);

    std::string dataset = dataset_stem(args.testbed);
    const std::vector<testbed_record> testbed = load_testbed(args.testbed, &dataset, nullptr);
    const std::vector<eval_instance> instances = expand_eval(testbed);

    build_config limits;  // word limits for demo ingestion
    const std::vector<demo> demos = pick_demos(args.demos_path, args.demo_count, args.seed, limits);

    std::ostringstream config;
    config << "command=decode testbed=" << args.testbed << " strategy=" << args.strategy
           << " seed=" << args.seed << " alpha=" << jsonl::format_double(cfg.alpha)
           << " cad_w=" << jsonl::format_double(cfg.cad_w)
           << " variant=" << variant_name(cfg.variant)
           << " threshold=" << jsonl::format_double(cfg.entropy_threshold) << " calibration="
           << (cfg.calibration == calibration_form::reduction ? "reduction" : "as-printed")
           << " max_tokens=" << cfg.max_tokens << " demos=" << demos.size()
           << " null_demos=" << (args.null_demos ? 1 : 0);

    if (args.resume && !args.trace_out.empty()) {
        throw invalid_argument_error("--resume cannot be combined with --trace-out");
    }

    // Carry over completed predictions when resuming a partial run.
    size_t start_index = 0;
    std::vector<std::pair<std::string, std::string>> carried;  // id -> raw record
    if (args.resume && std::filesystem::exists(args.out)) {
        for (const auto& j : jsonl::read_records(args.out)) {
            const std::string type = j.value("type", "");
            if (type == "prediction") carried.emplace_back(j.at("id").get<std::string>(), j.dump());
            if (type == "resume") start_index = j.at("next_index").get<size_t>();
        }
        if (carried.size() != start_index) {
            throw data_error("resume marker disagrees with retained predictions in " + args.out);
        }
    }

    jsonl::writer writer(args.out);
    writer.line(make_header("decode", args.seed, config.str(), dataset, args.strategy));
    std::unique_ptr<jsonl::writer> trace_writer;
    if (!args.trace_out.empty()) {
        trace_writer = std::make_unique<jsonl::writer>(args.trace_out);
        trace_writer->line(make_header("decode", args.seed, config.str(), dataset, args.strategy));
    }

    for (size_t i = 0; i < start_index; ++i) {
        if (carried[i].first != instances[i].id) {
            throw data_error("resumed predictions do not align with the testbed at index " +
                             std::to_string(i));
        }
        writer.line(carried[i].second);
    }

    decoder dec(*backend, templates, demos, phrases);
    const size_t wave = static_cast<size_t>(std::max(1, args.jobs));
    size_t index = start_index;
    while (index < instances.size()) {
        const size_t end = std::min(instances.size(), index + wave);
        std::vector<eval_instance> slice(instances.begin() + static_cast<ptrdiff_t>(index),
                                         instances.begin() + static_cast<ptrdiff_t>(end));
        std::vector<prediction> preds;
        try {
            preds = decode_batch(dec, slice, cfg, args.jobs);
        } catch (const transport_error&) {
            jsonl::object marker;
            marker.put("type", "resume");
            marker.put("next_index", static_cast<int64_t>(index));
            writer.line(marker);
            writer.keep_partial_on_destroy = true;
            throw;
        }
        for (size_t k = 0; k < preds.size(); ++k) {
            write_prediction(writer, slice[k], preds[k]);
            if (trace_writer) write_trace(*trace_writer, slice[k], preds[k]);
        }
        index = end;
    }
    writer.commit();
    if (trace_writer) trace_writer->commit();

    std::cout << "decoded " << (instances.size() - start_index) << " instances with "
              << args.strategy << " into " << args.out << "\n";
    return 0;
}

// -------------------------------------------------------------------- evaluate

struct evaluate_args {
    std::string testbed;
    std::string predictions;
    std::string out;
    std::string phrases_path;  // reserved for re-judging extensions
    std::string strategy_label;
    std::string dataset_label;
    std::optional<uint64_t> seed;
};

struct loaded_predictions {
    std::vector<std::pair<std::string, judged_prediction>> records;
    std::string strategy;
    std::string dataset;
    uint64_t seed = 0;
};

loaded_predictions load_predictions(const std::string& path) {
    loaded_predictions out;
    for (const auto& j : jsonl::read_records(path)) {
        const std::string type = j.value("type", "prediction");
        if (type == "header") {
            out.strategy = j.value("strategy", "");
            out.dataset = j.value("dataset", "");
            out.seed = j.value("seed", uint64_t{0});
            continue;
        }
        if (type != "prediction") continue;
        judged_prediction pred;
        pred.text = j.at("text").get<std::string>();
        pred.abstained = j.at("abstained").get<bool>();
        out.records.emplace_back(j.at("id").get<std::string>(), std::move(pred));
    }
    if (out.records.empty()) throw data_error("no predictions in " + path);
    return out;
}

int cmd_evaluate(const evaluate_args& args) {
    std::string dataset = dataset_stem(args.testbed);
    const std::vector<testbed_record> testbed = load_testbed(args.testbed, &dataset, nullptr);
    const std::vector<eval_instance> instances = expand_eval(testbed);
    const loaded_predictions preds = load_predictions(args.predictions);

    std::map<std::string, const eval_instance*> by_id;
    for (const auto& inst : instances) by_id[inst.id] = &inst;

    std::vector<std::string> orphans;
    std::vector<outcome_bucket> outcomes;
    std::map<std::string, bool> seen;
    for (const auto& [id, pred] : preds.records) {
        auto it = by_id.find(id);
        if (it == by_id.end()) {
            orphans.push_back("prediction without instance: " + id);
            continue;
        }
        seen[id] = true;
        outcomes.push_back(classify_outcome(pred, *it->second));
    }
    for (const auto& inst : instances) {
        if (!seen.count(inst.id)) orphans.push_back("instance without prediction: " + inst.id);
    }
    if (!orphans.empty()) {
        std::string msg = "prediction/testbed id mismatch:";
        for (const auto& o : orphans) msg += "\n  " + o;
        throw data_error(msg);
    }

    const confusion_counts counts = count_confusion(outcomes);
    const metrics_report report = make_report(counts);

    const std::string strategy =
        !args.strategy_label.empty() ? args.strategy_label
        : !preds.strategy.empty()    ? preds.strategy
                                     : "unknown";
    const std::string dataset_label =
        !args.dataset_label.empty() ? args.dataset_label
        : !preds.dataset.empty()    ? preds.dataset
                                    : dataset;
    const uint64_t seed = args.seed.value_or(preds.seed);

    std::cout << "strategy=" << strategy << " dataset=" << dataset_label << " seed=" << seed
              << "\n"
              << "  N1=" << counts.n1 << " N2=" << counts.n2 << " N3=" << counts.n3
              << " N4=" << counts.n4 << " N5=" << counts.n5 << " N=" << counts.total() << "\n"
              << "  F1_ans=" << jsonl::format_double(report.f1_ans)
              << " F1_abs=" << jsonl::format_double(report.f1_abs)
              << " RS=" << jsonl::format_double(report.rs)
              << " Acc=" << jsonl::format_double(report.acc)
              << " Cov=" << jsonl::format_double(report.cov)
              << " AnswerRate=" << jsonl::format_double(report.answer_rate) << "\n";

    if (!args.out.empty()) {
        std::ostringstream config;
        config << "command=evaluate testbed=" << args.testbed
               << " predictions=" << args.predictions << " strategy=" << strategy
               << " dataset=" << dataset_label;
        jsonl::writer writer(args.out);
        writer.line(make_header("evaluate", seed, config.str(), dataset_label, strategy));
        jsonl::object o;
        o.put("type", "report");
        o.put("strategy", strategy);
        o.put("dataset", dataset_label);
        o.put("seed", seed);
        o.put("f1_ans", report.f1_ans);
        o.put("f1_abs", report.f1_abs);
        o.put("rs", report.rs);
        o.put("acc", report.acc);
        o.put("cov", report.cov);
        o.put("answer_rate", report.answer_rate);
        o.put("n1", counts.n1);
        o.put("n2", counts.n2);
        o.put("n3", counts.n3);
        o.put("n4", counts.n4);
        o.put("n5", counts.n5);
        o.put("n", counts.total());
        writer.line(o);
        writer.commit();
    }
    return 0;
}

// ------------------------------------------------------- tune-entropy-threshold

struct tune_args {
    std::string testbed;
    std::string predictions;
    std::string traces;
    std::string out;
};

int cmd_tune(const tune_args& args) {
    std::string dataset = dataset_stem(args.testbed);
    const std::vector<testbed_record> testbed = load_testbed(args.testbed, &dataset, nullptr);
    const std::vector<eval_instance> instances = expand_eval(testbed);
    const loaded_predictions preds = load_predictions(args.predictions);

    std::map<std::string, const eval_instance*> by_id;
    for (const auto& inst : instances) by_id[inst.id] = &inst;

    // per-step contextual entropies, grouped by instance in step order
    std::map<std::string, std::vector<std::pair<int, double>>> step_entropies;
    for (const auto& j : jsonl::read_records(args.traces)) {
        if (j.value("type", "") != "trace") continue;
        if (!j.contains("h_c")) continue;
        step_entropies[j.at("id").get<std::string>()].emplace_back(j.at("step").get<int>(),
                                                                   j.at("h_c").get<double>());
    }
    if (step_entropies.empty()) throw data_error("no usable trace records in " + args.traces);

    struct per_instance {
        std::vector<double> entropies;
        outcome_bucket if_answered;
        bool answerable;
    };
    std::vector<per_instance> rows;
    for (const auto& [id, pred] : preds.records) {
        auto inst_it = by_id.find(id);
        auto tr_it = step_entropies.find(id);
        if (inst_it == by_id.end() || tr_it == step_entropies.end()) {
            throw data_error("trace/prediction/testbed ids do not align at " + id);
        }
        auto steps = tr_it->second;
        std::sort(steps.begin(), steps.end());
        per_instance row;
        for (const auto& [step, h] : steps) row.entropies.push_back(h);
        const eval_instance& inst = *inst_it->second;
        row.answerable = inst.answerable;
        row.if_answered = inst.answerable ? (is_correct(pred.text, inst.golds)
                                                 ? outcome_bucket::n1
                                                 : outcome_bucket::n2)
                                          : outcome_bucket::n4;
        rows.push_back(std::move(row));
    }

    std::unique_ptr<jsonl::writer> writer;
    if (!args.out.empty()) {
        writer = std::make_unique<jsonl::writer>(args.out);
        std::ostringstream config;
        config << "command=tune-entropy-threshold testbed=" << args.testbed
               << " predictions=" << args.predictions << " traces=" << args.traces;
        writer->line(make_header("tune-entropy-threshold", preds.seed, config.str(), dataset,
                                 preds.strategy));
    }

    for (entropy_variant variant : {entropy_variant::first_token, entropy_variant::average,
                                    entropy_variant::max, entropy_variant::min}) {
        std::vector<threshold_trace> traces;
        traces.reserve(rows.size());
        for (const auto& row : rows) {
            traces.push_back(threshold_trace{aggregate_entropy(variant, row.entropies),
                                             row.if_answered, row.answerable});
        }
        const double threshold = tune_entropy_threshold(traces);

        confusion_counts counts;
        for (const auto& t : traces) {
            outcome_bucket b = t.aggregate > threshold
                                   ? (t.answerable ? outcome_bucket::n3 : outcome_bucket::n5)
                                   : t.if_answered;
            switch (b) {
                case outcome_bucket::n1: ++counts.n1; break;
                case outcome_bucket::n2: ++counts.n2; break;
                case outcome_bucket::n3: ++counts.n3; break;
                case outcome_bucket::n4: ++counts.n4; break;
                case outcome_bucket::n5: ++counts.n5; break;
            }
        }
        const double rs = make_report(counts).rs;

        std::cout << "variant=" << variant_name(variant) << " threshold="
                  << (std::isinf(threshold) ? (threshold > 0 ? "+inf" : "-inf")
                                            : jsonl::format_double(threshold))
                  << " train_rs=" << jsonl::format_double(rs) << "\n";
        if (writer) {
            jsonl::object o;
            o.put("type", "threshold");
            o.put("variant", variant_name(variant));
            o.put("threshold", std::isinf(threshold)
                                   ? (threshold > 0 ? kInfSentinel : -kInfSentinel)
                                   : threshold);
            o.put("rs", rs);
            writer->line(o);
        }
    }
    if (writer) writer->commit();
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"contrastive decoding with abstention: testbed construction, decoding, and "
                 "reliability evaluation"};
    app.require_subcommand(1);

    build_args build;
    auto* sc_build = app.add_subcommand("build-testbed",
                                        "construct a balanced knowledge testbed from QA records");
    sc_build->add_option("--input", build.input, "QA records (native or MRQA-style lines)")
        ->required();
    sc_build->add_option("--out", build.out, "output testbed file")->required();
    sc_build->add_option("--backend", build.backend_spec, "mock:<file> | remote:<endpoint>");
    sc_build->add_option("--seed", build.seed, "base seed");
    sc_build->add_option("--samples", build.cfg.n, "consistency samples per estimate");
    sc_build->add_option("--temperature", build.cfg.temperature, "sampling temperature");
    sc_build->add_option("--eta", build.cfg.eta, "consistency threshold");
    sc_build->add_option("--span-words", build.cfg.span_words, "context window in words");
    sc_build->add_option("--candidate-cap", build.cfg.candidate_cap,
                         "irrelevant candidates to try (1 = strict nearest only)");
    sc_build->add_option("--max-tokens", build.cfg.max_tokens, "sample length cap");
    sc_build->add_option("--default-split", build.default_split, "split for unlabeled records");
    sc_build->add_option("--templates", build.templates_path, "template override file");
    sc_build->add_option("--embed-dim", build.embed_dim, "bag-of-words embedding dimension");

    decode_args dec;
    auto* sc_decode = app.add_subcommand("decode", "decode every testbed instance");
    sc_decode->add_option("--testbed", dec.testbed, "testbed file")->required();
    sc_decode->add_option("--out", dec.out, "predictions output file")->required();
    sc_decode->add_option("--backend", dec.backend_spec, "mock:<file> | remote:<endpoint>");
    sc_decode->add_option("--vocab", dec.vocab_path, "local token table for remote backends");
    sc_decode->add_option("--strategy", dec.strategy,
                          "context|abstain|self-ask|cad|acd|acd-a|entropy|fsb|cda|cda-m");
    sc_decode->add_option("--seed", dec.seed, "seed echoed into outputs");
    sc_decode->add_option("--alpha", dec.cfg.alpha, "momentum weight (cda-m)");
    sc_decode->add_option("--cad-w", dec.cfg.cad_w, "context amplification weight (cad)");
    std::string variant_flag = "first-token";
    sc_decode->add_option("--entropy-variant", variant_flag, "first-token|average|max|min");
    sc_decode->add_option("--entropy-threshold", dec.cfg.entropy_threshold,
                          "abstention threshold (entropy strategy)");
    std::string calibration_flag = "reduction";
    sc_decode->add_option("--calibration", calibration_flag, "reduction|as-printed");
    sc_decode->add_option("--max-tokens", dec.cfg.max_tokens, "generation length cap");
    sc_decode->add_option("--trace-out", dec.trace_out, "per-step trace output file");
    sc_decode->add_option("--demos", dec.demos_path, "QA file supplying demonstrations");
    sc_decode->add_option("--demo-count", dec.demo_count, "demonstrations per prompt");
    sc_decode->add_flag("--no-null-demos", "drop demonstrations from null prompts");
    sc_decode->add_option("--jobs", dec.jobs, "parallel decode sessions");
    sc_decode->add_flag("--resume", dec.resume, "continue a partial predictions file");

    evaluate_args ev;
    auto* sc_eval = app.add_subcommand("evaluate", "score predictions against a testbed");
    sc_eval->add_option("--testbed", ev.testbed, "testbed file")->required();
    sc_eval->add_option("--predictions", ev.predictions, "predictions file")->required();
    sc_eval->add_option("--out", ev.out, "report output file");
    sc_eval->add_option("--strategy-label", ev.strategy_label, "strategy name for the report");
    sc_eval->add_option("--dataset-label", ev.dataset_label, "dataset name for the report");

    tune_args tune;
    auto* sc_tune = app.add_subcommand("tune-entropy-threshold",
                                       "pick the RS-maximizing abstention threshold per variant");
    sc_tune->add_option("--testbed", tune.testbed, "train testbed file")->required();
    sc_tune->add_option("--predictions", tune.predictions, "train predictions file")->required();
    sc_tune->add_option("--traces", tune.traces, "train trace file")->required();
    sc_tune->add_option("--out", tune.out, "threshold output file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (sc_build->parsed()) return cmd_build_testbed(build);
        if (sc_decode->parsed()) {
            dec.cfg.variant = parse_variant(variant_flag);
            dec.cfg.calibration = parse_calibration(calibration_flag);
            dec.null_demos = sc_decode->count("--no-null-demos") == 0;
            return cmd_decode(dec);
        }
        if (sc_eval->parsed()) return cmd_evaluate(ev);
        if (sc_tune->parsed()) return cmd_tune(tune);
    } catch (const transport_error& e) {
        std::cerr << "transport error (attempts=" << e.attempts
                  << ", retryable=" << (e.retryable ? "yes" : "no") << "): " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

int run(const std::vector<std::string>& args) {
    std::vector<std::string> argv_store;
    argv_store.reserve(args.size() + 1);
    argv_store.push_back("abstain-decode");
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    argv.reserve(argv_store.size());
    for (const auto& a : argv_store) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace abstain::cli
