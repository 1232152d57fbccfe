#include "textnorm/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>

#include "CLI11.hpp"
#include "textnorm/config.hpp"
#include "textnorm/inference.hpp"
#include "textnorm/m2scorer.hpp"
#include "textnorm/mle.hpp"
#include "textnorm/trainer.hpp"

namespace textnorm {

namespace {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

RunConfig resolve_config(const std::string& config_path,
                         const std::vector<std::string>& sets) {
  RunConfig rc;
  if (!config_path.empty()) rc.load_file(config_path);
  for (const std::string& kv : sets) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("--set expects key=value, got: " + kv);
    }
    rc.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  std::fputs(rc.resolved().c_str(), stderr);
  return rc;
}

WordFeatureProvider make_provider(const RunConfig& rc) {
  if (rc.embed_mode == "none") {
    if (!rc.embed_file.empty() || !rc.embed_file2.empty()) {
      throw ConfigError("embed_file set while embed_mode is none");
    }
    return WordFeatureProvider();
  }
  if (rc.embed_file.empty()) {
    throw ConfigError("embed_mode " + rc.embed_mode + " requires embed_file");
  }
  const FeatureMode mode = rc.embed_mode == "subword" ? FeatureMode::subword
                                                      : FeatureMode::whole_word;
  auto a = std::make_shared<SubwordEmbeddings>(SubwordEmbeddings::load(rc.embed_file));
  if (rc.embed_file2.empty()) return WordFeatureProvider(mode, std::move(a), rc.seed);
  auto b = std::make_shared<SubwordEmbeddings>(SubwordEmbeddings::load(rc.embed_file2));
  return WordFeatureProvider(mode, std::move(a), std::move(b), rc.seed);
}

std::vector<FeatureBatch> feature_batches(const WordFeatureProvider& provider,
                                          const std::vector<Batch>& batches) {
  std::vector<FeatureBatch> out;
  out.reserve(batches.size());
  for (const Batch& b : batches) out.push_back(make_feature_batch(provider, b));
  return out;
}

int cmd_train(const RunConfig& rc, const std::string& train_path,
              const std::string& dev_path, const std::string& out_dir) {
  const auto pairs = training_pairs(parse_m2_file(train_path));
  std::vector<std::string> texts;
  for (const auto& [s, t] : pairs) {
    texts.push_back(s);
    texts.push_back(t);
  }
  const Vocabulary vocab = Vocabulary::build(texts);
  const WordFeatureProvider provider = make_provider(rc);

  ModelConfig mc;
  mc.d_ce = rc.d_ce;
  mc.d = rc.d_hidden;
  mc.d_we = provider.dim();
  mc.dropout_p = static_cast<float>(rc.dropout);
  mc.sampling_p = static_cast<float>(rc.sampling);
  Model<float> model(mc, vocab, rc.seed, provider.whitespace_vec());

  const auto batches = filter_and_batch(pairs, vocab, rc.max_chars, rc.batch, rc.seed);
  const auto feats = feature_batches(provider, batches);
  std::vector<Batch> dev_batches;
  if (!dev_path.empty()) {
    const auto dev_pairs = training_pairs(parse_m2_file(dev_path));
    try {
      dev_batches = filter_and_batch(dev_pairs, vocab, rc.max_chars, rc.batch, rc.seed);
    } catch (const DataError&) {
      dev_batches.clear();  // a dev set the length filter empties is merely useless
    }
  }
  const auto dev_feats = feature_batches(provider, dev_batches);

  TrainConfig tc;
  tc.epochs = rc.epochs;
  tc.lr = rc.lr;
  tc.beta1 = rc.beta1;
  tc.beta2 = rc.beta2;
  tc.epsilon = rc.epsilon;
  tc.clip_norm = rc.clip;
  tc.seed = rc.seed;

  std::filesystem::create_directories(out_dir);
  {
    std::ofstream f(out_dir + "/config.resolved", std::ios::binary);
    if (!f) throw DataError("cannot write " + out_dir + "/config.resolved");
    f << rc.resolved();
  }
  std::FILE* log = std::fopen((out_dir + "/loss.log").c_str(), "wb");
  if (log == nullptr) throw DataError("cannot write " + out_dir + "/loss.log");
  try {
    train_model(model, batches, feats, dev_batches, dev_feats, tc, log);
  } catch (...) {
    std::fclose(log);
    throw;
  }
  std::fclose(log);
  model.save_checkpoint(out_dir + "/checkpoint.bin");
  return 0;
}

int cmd_correct(const RunConfig& rc, const std::string& ckpt_path,
                const std::string& in_path, const std::string& out_path) {
  Model<float> model = Model<float>::load_checkpoint(ckpt_path);
  WordFeatureProvider provider = make_provider(rc);
  if (provider.dim() != model.config().d_we) {
    throw DataError("embedding width does not match the checkpoint's d_we");
  }
  if (model.config().d_we > 0) provider.set_whitespace_vec(model.whitespace_vec());

  BeamConfig bc;
  bc.width = rc.beam;
  bc.length_normalize = rc.length_normalize;

  const auto lines = read_lines(in_path);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + out_path);
  for (const std::string& line : lines) {
    if (line.empty()) {
      out << "\n";  // nothing to normalize
    } else {
      out << correct_sentence(model, provider, line, bc) << "\n";
    }
  }
  return 0;
}

int cmd_evaluate(const RunConfig& rc, const std::string& gold_path,
                 const std::string& hyp_path) {
  const auto gold = parse_m2_file(gold_path);
  const auto hyp = read_lines(hyp_path);
  const ScoreReport report = score_corpus(gold, hyp, 0, rc.merge_window);
  std::fputs(format_report(report).c_str(), stdout);
  return 0;
}

int cmd_mle_build(const RunConfig& rc, const std::string& train_path,
                  const std::string& out_path) {
  const ActionTable table =
      ActionTable::build(parse_m2_file(train_path), rc.mle_phrase);
  table.save(out_path);
  return 0;
}

int cmd_mle_apply(const std::string& table_path, const std::string& in_path,
                  const std::string& out_path) {
  const ActionTable table = ActionTable::load(table_path);
  const auto lines = read_lines(in_path);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + out_path);
  for (const std::string& line : lines) {
    out << join_tokens(table.apply(split_tokens(line))) << "\n";
  }
  return 0;
}

int cmd_embed(const RunConfig& rc, const std::string& corpus_path,
              const std::string& out_path) {
  std::vector<std::string> tokens;
  for (const std::string& line : read_lines(corpus_path)) {
    for (std::string& t : split_tokens(line)) tokens.push_back(std::move(t));
  }
  SkipgramConfig sc;
  sc.dim = rc.embed_dim;
  sc.window = rc.embed_window;
  sc.subwords = rc.embed_subwords;
  sc.minn = rc.embed_minn;
  sc.maxn = rc.embed_maxn;
  sc.bucket_count = rc.embed_buckets;
  sc.negatives = rc.embed_negatives;
  sc.epochs = rc.embed_epochs;
  sc.lr = rc.embed_lr;
  sc.seed = rc.seed;
  train_skipgram(tokens, sc).save(out_path);
  return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args) {
  try {
    CLI::App app{"character-level text normalization toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> sets;
    std::string train_path, dev_path, out_dir;
    std::string ckpt_path, in_path, out_path;
    std::string gold_path, hyp_path;
    std::string table_path, corpus_path;

    auto add_config_opts = [&](CLI::App* sub) {
      sub->add_option("--config", config_path, "key = value configuration file");
      sub->add_option("--set", sets, "override one key, e.g. --set epochs=5");
    };

    CLI::App* train = app.add_subcommand("train", "train a normalization model");
    train->add_option("--train", train_path, "training data, M2 format")->required();
    train->add_option("--dev", dev_path, "development data, M2 format");
    train->add_option("--out", out_dir, "output directory")->required();
    add_config_opts(train);

    CLI::App* correct = app.add_subcommand("correct", "normalize text line by line");
    correct->add_option("--checkpoint", ckpt_path, "trained model")->required();
    correct->add_option("--input", in_path, "input text, one sentence per line")->required();
    correct->add_option("--output", out_path, "output text")->required();
    add_config_opts(correct);

    CLI::App* evaluate = app.add_subcommand("evaluate", "score hypotheses against M2 references");
    evaluate->add_option("--gold", gold_path, "reference file, M2 format")->required();
    evaluate->add_option("--hyp", hyp_path, "hypothesis text, aligned line by line")->required();
    add_config_opts(evaluate);

    CLI::App* mle = app.add_subcommand("mle", "phrase replacement baseline");
    mle->add_option("--train", train_path, "training data, M2 format");
    mle->add_option("--table", table_path, "existing action table");
    mle->add_option("--input", in_path, "input text to normalize");
    mle->add_option("--output", out_path, "output text");
    mle->add_option("--out", out_dir, "where to write the trained table");
    add_config_opts(mle);

    CLI::App* embed = app.add_subcommand("embed", "train word embeddings");
    embed->add_option("--corpus", corpus_path, "tokenized text corpus")->required();
    embed->add_option("--out", out_path, "output vector file")->required();
    add_config_opts(embed);

    std::vector<std::string> full{"textnorm"};
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    argv.reserve(full.size());
    for (const std::string& s : full) argv.push_back(s.c_str());
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e);
      return code == 0 ? 0 : 1;
    }

    if (app.got_subcommand(train)) {
      return cmd_train(resolve_config(config_path, sets), train_path, dev_path, out_dir);
    }
    if (app.got_subcommand(correct)) {
      return cmd_correct(resolve_config(config_path, sets), ckpt_path, in_path, out_path);
    }
    if (app.got_subcommand(evaluate)) {
      return cmd_evaluate(resolve_config(config_path, sets), gold_path, hyp_path);
    }
    if (app.got_subcommand(mle)) {
      const RunConfig rc = resolve_config(config_path, sets);
      const bool build = !train_path.empty();
      const bool apply = !table_path.empty();
      if (build == apply) {
        throw UsageError("mle needs either --train/--out or --table/--input/--output");
      }
      if (build) {
        if (out_dir.empty()) throw UsageError("mle --train needs --out");
        return cmd_mle_build(rc, train_path, out_dir);
      }
      if (in_path.empty() || out_path.empty()) {
        throw UsageError("mle --table needs --input and --output");
      }
      return cmd_mle_apply(table_path, in_path, out_path);
    }
    if (app.got_subcommand(embed)) {
      return cmd_embed(resolve_config(config_path, sets), corpus_path, out_path);
    }
    throw UsageError("no subcommand given");
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}

}  // namespace textnorm
