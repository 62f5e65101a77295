// Command-line driver: prepare, train, eval, predict, rank, serve.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lacuna/lacuna.hpp"
#include "lacuna/service.hpp"

namespace fs = std::filesystem;
using namespace lacuna;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Resolved option values of a subcommand, for the run manifest.
std::vector<std::pair<std::string, std::string>> resolved_flags(const CLI::App& app) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const CLI::Option* opt : app.get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name == "config" || opt->get_lnames().empty()) continue;
    std::string value;
    for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
    if (value.empty()) value = opt->get_default_str();
    if (value.empty() && opt->get_expected_max() == 0) value = "false";
    out.emplace_back(name, value);
  }
  return out;
}

/// Errors raised while handling a query text are query-validation failures.
[[noreturn]] void rethrow_as_query_error(const Error& e) {
  switch (e.code()) {
    case ErrorCode::UnbalancedBrackets:
    case ErrorCode::MixedBracketContent:
    case ErrorCode::EmptyBrackets:
      throw Error(ErrorCode::NoGapPresent, std::string("invalid query text: ") + e.what());
    default:
      throw e;
  }
}

/// Inserts `--key value` for every `key=value` line of the file named by
/// `--config`, skipping keys already given on the command line so that
/// explicit flags win. Boolean flags take `true` or `false`.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty() || args.size() < 2) return args;
  auto given = [&](const std::string& key) {
    for (const auto& a : args) {
      if (a == "--" + key || a.rfind("--" + key + "=", 0) == 0) return true;
    }
    return false;
  };
  std::istringstream in(read_text(path));
  std::vector<std::string> extra;
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::BadFormat, path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "config" || given(key)) continue;
    if (value == "true") {
      extra.push_back("--" + key);
    } else if (value != "false") {
      extra.push_back("--" + key);
      extra.push_back(value);
    }
  }
  // args[1] is the subcommand; config-derived flags follow it.
  args.insert(args.begin() + 2, extra.begin(), extra.end());
  return args;
}

// ---------------------------------------------------------------- prepare

struct PrepareArgs {
  std::string corpus, out;
  std::uint64_t seed = 1;
};

int run_prepare(const PrepareArgs& a, const CLI::App& app) {
  const auto t0 = Clock::now();
  // Everything is computed before the output directory is touched, so a
  // failing run leaves no partial outputs.
  const PreparedCorpus p = prepare_corpus(a.corpus, a.seed);
  const auto files = prepared_files(p);

  fs::create_directories(a.out);
  RunManifest m;
  m.subcommand = "prepare";
  m.flags = resolved_flags(app);
  m.seeds = {{"partition", std::to_string(a.seed)},
             {"test_random", std::to_string(derive_seed(a.seed, kRandomTestStream))},
             {"test_smart", std::to_string(derive_seed(a.seed, kSmartTestStream))}};
  Digest corpus_digest;
  for (const auto& s : p.loaded.sentences) corpus_digest.update(s.id + "\t" + s.serialize() + "\n");
  m.input_digests = {{"corpus", corpus_digest.hex()}};
  for (const auto& [name, text] : files) {
    write_text(fs::path(a.out) / name, text);
    m.outputs.emplace_back(name, digest_hex(text));
  }
  const StatsReport gold = corpus_stats(p.gold), target = corpus_stats(p.target);
  std::size_t gold_masked = 0;
  for (const auto& item : p.gold_set) gold_masked += item.mask_positions.size();
  m.values = {{"sentences", std::to_string(p.loaded.sentences.size())},
              {"complete", std::to_string(p.complete.size())},
              {"train", std::to_string(p.train.size())},
              {"dev", std::to_string(p.dev.size())},
              {"test", std::to_string(p.test.size())},
              {"vocab_size", std::to_string(p.vocab.size())},
              {"gold_sentences", std::to_string(gold.sentences)},
              {"gold_missing_characters", std::to_string(gold.missing_characters)},
              {"gold_masked_characters", std::to_string(gold_masked)},
              {"target_sentences", std::to_string(target.sentences)},
              {"target_missing_characters", std::to_string(target.missing_characters)},
              {"partition_hash", p.partition.manifest_hash}};
  m.wall_seconds = seconds_since(t0);
  m.write(fs::path(a.out) / "manifest.txt");

  for (const auto& w : p.loaded.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "sentences " << p.loaded.sentences.size() << " (complete " << p.complete.size() << ", gold "
            << gold.sentences << ", target " << target.sentences << ")\n"
            << "partition train " << p.train.size() << " dev " << p.dev.size() << " test " << p.test.size() << "\n"
            << "vocab " << p.vocab.size() << "\n"
            << "gold missing characters " << gold.missing_characters << ", target missing characters "
            << target.missing_characters << "\n";
  return 0;
}

// ------------------------------------------------------------------ train

struct TrainArgs {
  std::string data, out, mask = "random", remask = "dynamic";
  TrainConfig cfg;
  ModelConfig model;
  bool unidirectional = false;
  std::optional<std::uint64_t> mask_seed;
  std::size_t max_sentences = 0;
};

int run_train(TrainArgs a, const CLI::App& app) {
  const auto t0 = Clock::now();
  const fs::path data(a.data);
  const Vocabulary vocab = Vocabulary::load(data / "vocab.txt");
  auto train_sentences = load_split(data / "train.txt");
  const auto dev_sentences = load_split(data / "dev.txt");
  if (a.max_sentences > 0 && train_sentences.size() > a.max_sentences) train_sentences.resize(a.max_sentences);

  const MaskPolicy policy{parse_distribution(a.mask), parse_remask(a.remask), a.mask_seed.value_or(a.cfg.seed)};
  a.model.vocab_size = vocab.size();
  a.model.bidirectional = !a.unidirectional;

  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  const fs::path log_path = out.string() + ".log.tsv";
  std::ofstream log(log_path, std::ios::binary);
  if (!log) throw Error(ErrorCode::Io, "cannot write " + log_path.string());
  log << "epoch\ttrain_loss\tdev_loss\tdev_accuracy\tseconds\n";

  std::cerr << "training " << policy.name() << " on " << train_sentences.size() << " sentences, vocab " << vocab.size()
            << "\n";
  const TrainResult result = train(encode_split(train_sentences, vocab), encode_split(dev_sentences, vocab), policy,
                                   a.model, a.cfg, [&](const EpochRecord& r) {
                                     char line[160];
                                     std::snprintf(line, sizeof line, "%zu\t%.6f\t%.6f\t%.6f\t%.2f", r.epoch,
                                                   r.train_loss, r.dev_loss, r.dev_accuracy, r.seconds);
                                     log << line << "\n" << std::flush;
                                     std::cerr << "epoch " << line << "\n";
                                   });

  Checkpoint ckpt{vocab, result.best, {policy.name(), result.best_epoch, result.best_dev_accuracy, a.cfg.seed}};
  save_checkpoint(out, ckpt);

  RunManifest m;
  m.subcommand = "train";
  m.flags = resolved_flags(app);
  for (auto& [name, value] : m.flags) {
    if (name == "mask-seed") value = std::to_string(policy.seed);
  }
  m.seeds = {{"init", std::to_string(a.cfg.seed)},
             {"mask", std::to_string(policy.seed)},
             {"dev_mask", std::to_string(a.cfg.dev_mask_seed)}};
  m.input_digests = {{"vocab", vocab.digest()},
                     {"train", file_digest(data / "train.txt")},
                     {"dev", file_digest(data / "dev.txt")}};
  m.outputs = {{"checkpoint", out.string()}, {"checkpoint_digest", file_digest(out)}, {"log", log_path.string()}};
  m.values = {{"regime", policy.name()},
              {"best_epoch", std::to_string(result.best_epoch)},
              {"best_dev_accuracy", std::to_string(result.best_dev_accuracy)},
              {"epochs_run", std::to_string(result.log.size() - 1)},
              {"parameters", std::to_string(ckpt.model.parameters().parameter_count())}};
  m.wall_seconds = seconds_since(t0);
  m.write(out.string() + ".manifest.txt");
  std::cout << "saved " << out.string() << " (" << policy.name() << ", best epoch " << result.best_epoch
            << ", dev accuracy " << result.best_dev_accuracy << ")\n";
  return 0;
}

// ------------------------------------------------------------------- eval

struct EvalArgs {
  std::vector<std::string> ckpts, baselines, test_sets;
  std::string data, report, table, save_trigram;
  std::uint64_t seed = 1;
  std::size_t batch_size = 64;
  double trigram_k = TrigramTable::kDefaultSmoothing;
};

int run_eval(const EvalArgs& a, const CLI::App& app) {
  const auto t0 = Clock::now();
  if (a.ckpts.empty() && a.baselines.empty()) throw Error(ErrorCode::BadFormat, "eval needs --ckpt or --baseline");

  std::vector<std::string> set_names;
  std::vector<std::vector<MaskedItem>> sets;
  for (const auto& path : a.test_sets) {
    set_names.push_back(fs::path(path).stem().string());
    sets.push_back(load_masked_set(path));
  }

  struct Row {
    std::string name;
    std::function<BatchPredictor()> make;
    const Vocabulary* vocab;
  };
  std::vector<Row> rows;
  std::vector<std::unique_ptr<Checkpoint>> ckpts;
  for (const auto& path : a.ckpts) {
    ckpts.push_back(std::make_unique<Checkpoint>(load_checkpoint(path)));
    const Checkpoint* c = ckpts.back().get();
    rows.push_back({fs::path(path).stem().string(), [c] { return model_predictor(*c); }, &c->vocab});
  }

  std::optional<Vocabulary> data_vocab;
  std::vector<std::vector<TokenId>> train_ids;
  if (!a.baselines.empty()) {
    const fs::path data = a.data.empty() ? fs::path(a.test_sets.front()).parent_path() : fs::path(a.data);
    data_vocab = Vocabulary::load(data / "vocab.txt");
    train_ids = encode_split(load_split(data / "train.txt"), *data_vocab);
  }
  std::shared_ptr<TrigramTable> trigram;
  for (const auto& b : a.baselines) {
    const Vocabulary* v = &*data_vocab;
    if (b == "random") {
      rows.push_back({"baseline:random",
                      [v, seed = a.seed] {
                        return per_sample([b = RandomBaseline(v->size(), seed)](const MaskedSample& s) mutable {
                          return b.predict(s);
                        });
                      }, v});
    } else if (b == "mode") {
      auto mode = std::make_shared<ModeBaseline>(train_ids);
      rows.push_back({"baseline:mode", [mode] { return per_sample([mode](const MaskedSample& s) { return mode->predict(s); }); }, v});
    } else if (b == "trigram") {
      if (!trigram) {
        trigram = std::make_shared<TrigramTable>(train_ids, v->size(), a.trigram_k);
        if (!a.save_trigram.empty()) trigram->save(a.save_trigram, *v);
      }
      rows.push_back({"baseline:trigram", [t = trigram] { return per_sample([t](const MaskedSample& s) { return t->predict(s); }); }, v});
    } else {
      throw Error(ErrorCode::BadFormat, "unknown baseline: " + b);
    }
  }

  nlohmann::ordered_json reports = nlohmann::ordered_json::array();
  std::vector<std::string> row_names;
  std::vector<std::vector<EvalReport>> table;
  for (const auto& row : rows) {
    row_names.push_back(row.name);
    table.emplace_back();
    for (std::size_t i = 0; i < sets.size(); ++i) {
      const auto samples = to_samples(sets[i], *row.vocab);
      // Each (row, test set) pair gets a freshly seeded predictor.
      const EvalReport r = evaluate(row.make(), samples, set_names[i], row.name, a.seed, a.batch_size);
      reports.push_back(r.to_json());
      table.back().push_back(r);
    }
  }
  const std::string text = format_table(row_names, set_names, table);
  std::cout << text;

  nlohmann::ordered_json doc;
  doc["reports"] = reports;
  doc["table"] = {{"rows", row_names}, {"columns", set_names}};
  RunManifest m;
  m.subcommand = "eval";
  m.flags = resolved_flags(app);
  m.seeds = {{"random_baseline", std::to_string(a.seed)}};
  for (std::size_t i = 0; i < a.test_sets.size(); ++i) m.input_digests.emplace_back(set_names[i], file_digest(a.test_sets[i]));
  for (const auto& path : a.ckpts) m.input_digests.emplace_back(fs::path(path).stem().string(), file_digest(path));
  if (trigram && !a.save_trigram.empty()) m.outputs.emplace_back("trigram", a.save_trigram);
  if (!a.report.empty()) {
    const fs::path report(a.report);
    if (report.has_parent_path()) fs::create_directories(report.parent_path());
    write_text(report, doc.dump(2) + "\n");
    m.outputs.emplace_back("report", report.string());
    if (!a.table.empty()) {
      write_text(a.table, text);
      m.outputs.emplace_back("table", a.table);
    }
    m.wall_seconds = seconds_since(t0);
    m.write(report.string() + ".manifest.txt");
  }
  return 0;
}

// -------------------------------------------------------- predict / rank

struct QueryArgs {
  std::string ckpt, text, candidates, candidates_file, out;
  std::size_t top_k = 10;
  bool json = false;
};

void finish_query(const QueryArgs& a, const CLI::App& app, const char* subcommand, const Json& body,
                  Clock::time_point t0) {
  if (a.out.empty()) return;
  write_text(a.out, body.dump(2) + "\n");
  RunManifest m;
  m.subcommand = subcommand;
  m.flags = resolved_flags(app);
  m.input_digests = {{"checkpoint", file_digest(a.ckpt)}};
  m.outputs = {{"result", a.out}};
  m.wall_seconds = seconds_since(t0);
  m.write(a.out + ".manifest.txt");
}

Service single_model_service(const std::string& path) {
  return Service({LoadedModel{"model", path, load_checkpoint(path)}});
}

int run_predict(const QueryArgs& a, const CLI::App& app) {
  const auto t0 = Clock::now();
  const Service service = single_model_service(a.ckpt);
  const Checkpoint& ckpt = service.models().front().checkpoint;
  GapPrediction pred;
  try {
    pred = predict_distributions(parse_line(a.text), ckpt);
  } catch (const Error& e) {
    rethrow_as_query_error(e);
  }
  const ApiResponse r = service.predict(Json{{"model_id", "model"}, {"text", a.text}, {"top_k", a.top_k}});
  if (a.json) {
    std::cout << r.body.dump(2) << "\n";
  } else {
    std::cout << pred.filled_text << "\n";
    for (const auto& pos : r.body["positions"]) {
      std::cout << "position " << pos["index"].get<int>() << ":";
      for (const auto& t : pos["top_k"]) {
        char buf[64];
        std::snprintf(buf, sizeof buf, " %s %.4f", t["char"].get<std::string>().c_str(), t["log_prob"].get<double>());
        std::cout << buf;
      }
      std::cout << "\n";
    }
  }
  finish_query(a, app, "predict", r.body, t0);
  return 0;
}

int run_rank(const QueryArgs& a, const CLI::App& app) {
  const auto t0 = Clock::now();
  const Checkpoint ckpt = load_checkpoint(a.ckpt);
  RankQuery query;
  if (!a.candidates.empty()) query.candidates = split_candidates(a.candidates);
  if (!a.candidates_file.empty()) {
    std::istringstream in(read_text(a.candidates_file));
    for (std::string line; std::getline(in, line);) {
      if (!line.empty()) query.candidates.push_back(line);
    }
  }
  std::vector<RankedCandidate> ranked;
  try {
    query.context = parse_line(a.text);
    ranked = rank_candidates(query, ckpt);
  } catch (const Error& e) {
    rethrow_as_query_error(e);
  }
  Json rows = Json::array();
  for (const auto& r : ranked) rows.push_back({{"text", r.text}, {"log_prob", r.log_prob}, {"rank", r.rank}});
  const Json body{{"log_base", "e"}, {"ranked", rows}};
  if (a.json) {
    std::cout << body.dump(2) << "\n";
  } else {
    std::cout << "rank\tlog_prob\tcandidate\n";
    for (const auto& r : ranked) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%zu\t%.4f\t", r.rank, r.log_prob);
      std::cout << buf << r.text << "\n";
    }
  }
  finish_query(a, app, "rank", body, t0);
  return 0;
}

// ------------------------------------------------------------------ serve

struct ServeArgs {
  std::vector<std::string> ckpts;
  std::string host = "127.0.0.1", cors_origin = "*";
  int port = 8080;
};

int run_serve(const ServeArgs& a) {
  std::vector<fs::path> paths(a.ckpts.begin(), a.ckpts.end());
  const Service service = Service::from_paths(paths);
  httplib::Server server;
  service.mount(server, a.cors_origin);
  if (!server.bind_to_port(a.host, a.port)) throw Error(ErrorCode::Io, "cannot bind " + a.host + ":" + std::to_string(a.port));
  std::cout << "serving " << service.models().size() << " model(s) on http://" << a.host << ":" << a.port << "\n"
            << std::flush;
  server.listen_after_bind();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Character-level masked language models for filling manuscript lacunae", "lacuna"};
  app.require_subcommand(1);
  std::string config_path;

  PrepareArgs prep;
  auto* prepare = app.add_subcommand("prepare", "Parse a corpus, partition it and write the evaluation sets");
  prepare->add_option("--config", config_path, "key=value file supplying any flag");
  prepare->add_option("--corpus", prep.corpus, "Directory of .txt files, one sentence per line")->required();
  prepare->add_option("--out", prep.out, "Output directory")->required();
  prepare->add_option("--seed", prep.seed, "Partition and test-mask seed")->capture_default_str();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train one masked language model");
  train_cmd->add_option("--config", config_path, "key=value file supplying any flag");
  train_cmd->add_option("--data", tr.data, "Directory written by prepare")->required();
  train_cmd->add_option("--out", tr.out, "Checkpoint path")->required();
  train_cmd->add_option("--mask", tr.mask, "random or smart")->check(CLI::IsMember({"random", "smart"}))->capture_default_str();
  train_cmd->add_option("--remask", tr.remask, "once or dynamic")->check(CLI::IsMember({"once", "dynamic"}))->capture_default_str();
  train_cmd->add_option("--max-epochs", tr.cfg.max_epochs)->capture_default_str();
  train_cmd->add_option("--patience", tr.cfg.early_stop_patience, "Epochs without dev improvement before stopping")->capture_default_str();
  train_cmd->add_option("--batch-size", tr.cfg.batch_size)->capture_default_str();
  train_cmd->add_option("--lr", tr.cfg.learning_rate)->capture_default_str();
  train_cmd->add_option("--weight-decay", tr.cfg.weight_decay)->capture_default_str();
  train_cmd->add_option("--grad-clip", tr.cfg.grad_clip_norm, "Global gradient norm cap, 0 disables")->capture_default_str();
  train_cmd->add_option("--seed", tr.cfg.seed, "Initialization and batching seed")->capture_default_str();
  train_cmd->add_option("--mask-seed", tr.mask_seed, "Training mask seed (default: --seed)");
  train_cmd->add_option("--dev-mask-seed", tr.cfg.dev_mask_seed)->capture_default_str();
  train_cmd->add_option("--max-length", tr.cfg.max_length, "Truncate longer sentences, 0 keeps all")->capture_default_str();
  train_cmd->add_option("--max-sentences", tr.max_sentences, "Use only the first N training sentences, 0 keeps all")->capture_default_str();
  train_cmd->add_option("--embedding-dim", tr.model.embedding_dim)->capture_default_str();
  train_cmd->add_option("--hidden-dim", tr.model.hidden_dim)->capture_default_str();
  train_cmd->add_option("--projection-dim", tr.model.projection_dim)->capture_default_str();
  train_cmd->add_option("--layers", tr.model.layers)->capture_default_str();
  train_cmd->add_flag("--unidirectional", tr.unidirectional, "Left-to-right LSTM only");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score models and baselines on masked test sets");
  eval_cmd->add_option("--config", config_path, "key=value file supplying any flag");
  eval_cmd->add_option("--ckpt", ev.ckpts, "Checkpoint (repeatable)");
  eval_cmd->add_option("--baseline", ev.baselines, "random, mode or trigram (repeatable)")
      ->check(CLI::IsMember({"random", "mode", "trigram"}));
  eval_cmd->add_option("--test-set", ev.test_sets, "Masked set file (repeatable)")->required();
  eval_cmd->add_option("--data", ev.data, "Prepared directory for baselines (default: test set directory)");
  eval_cmd->add_option("--report", ev.report, "JSON report path");
  eval_cmd->add_option("--table", ev.table, "Also write the text table here (needs --report)");
  eval_cmd->add_option("--seed", ev.seed, "Random baseline seed")->capture_default_str();
  eval_cmd->add_option("--batch-size", ev.batch_size)->capture_default_str();
  eval_cmd->add_option("--trigram-k", ev.trigram_k, "Add-k smoothing of the trigram baseline")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  eval_cmd->add_option("--save-trigram", ev.save_trigram, "Write the trigram count table here");

  QueryArgs pq;
  auto* predict = app.add_subcommand("predict", "Fill the blank lacunae of a line");
  predict->add_option("--config", config_path, "key=value file supplying any flag");
  predict->add_option("--ckpt", pq.ckpt)->required();
  predict->add_option("--text", pq.text, "Line in corpus markup, e.g. ab[..]e")->required();
  predict->add_option("--top-k", pq.top_k)->capture_default_str();
  predict->add_flag("--json", pq.json, "Print the service response body");
  predict->add_option("--out", pq.out, "Also write the JSON result and a manifest here");

  QueryArgs rq;
  auto* rank = app.add_subcommand("rank", "Rank same-length candidates for one blank lacuna");
  rank->add_option("--config", config_path, "key=value file supplying any flag");
  rank->add_option("--ckpt", rq.ckpt)->required();
  rank->add_option("--text", rq.text, "Line with exactly one blank lacuna")->required();
  auto* cand = rank->add_option("--candidates", rq.candidates, "Comma-separated candidates");
  auto* cand_file = rank->add_option("--candidates-file", rq.candidates_file, "One candidate per line");
  cand->excludes(cand_file);
  rank->add_flag("--json", rq.json, "Print the service response body");
  rank->add_option("--out", rq.out, "Also write the JSON result and a manifest here");

  ServeArgs sv;
  auto* serve = app.add_subcommand("serve", "Serve /models, /predict and /rank over HTTP");
  serve->add_option("--config", config_path, "key=value file supplying any flag");
  serve->add_option("--ckpt", sv.ckpts, "Checkpoint (repeatable)");
  serve->add_option("--port", sv.port)->capture_default_str();
  serve->add_option("--host", sv.host)->capture_default_str();
  serve->add_option("--cors-origin", sv.cors_origin)->capture_default_str();

  std::vector<std::string> args;
  try {
    args = expand_config(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return 2;
  }
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*prepare) return run_prepare(prep, *prepare);
    if (*train_cmd) return run_train(tr, *train_cmd);
    if (*eval_cmd) return run_eval(ev, *eval_cmd);
    if (*predict) return run_predict(pq, *predict);
    if (*rank) {
      if (rq.candidates.empty() && rq.candidates_file.empty()) {
        throw Error(ErrorCode::NoCandidates, "rank needs --candidates or --candidates-file");
      }
      return run_rank(rq, *rank);
    }
    if (*serve) return run_serve(sv);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
