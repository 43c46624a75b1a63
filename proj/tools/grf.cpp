// grf: ingest | extract | train | generate | trace | eval | synth

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "grf/grf.hpp"

namespace fs = std::filesystem;
using namespace grf;

namespace {

struct LexiconFlags {
  std::string lemmas, stopwords, pos;

  void add(CLI::App* app) {
    app->add_option("--lemmas", lemmas, "Lemma table (form<TAB>lemma); default built-in");
    app->add_option("--stopwords", stopwords, "Stop-word list; default built-in");
    app->add_option("--pos", pos, "Noun/verb lexicon used with --pos-filter");
  }

  Lexicons load(bool pos_filter) const {
    Lexicons lex;
    lex.lemmatizer = lemmas.empty() ? default_lemmatizer() : Lemmatizer::load(lemmas);
    lex.stopwords = stopwords.empty() ? default_stopwords() : WordSet::load(stopwords);
    if (pos_filter) {
      if (pos.empty()) throw Error(ErrorCode::Config, "--pos-filter needs a lexicon (--pos FILE)");
      lex.pos = WordSet::load_pos(pos);
    }
    return lex;
  }
};

/// Config file plus flag overrides. Flags left unset keep the file/default value.
struct ConfigFlags {
  std::string path;
  std::optional<std::size_t> hops, top_b, flow_hops, steps, batch_size, beam, max_len, d_model, d_graph;
  std::optional<double> gamma, lr, alpha, beta;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> aggregator, variant;
  bool pos_filter = false;

  void add_extraction(CLI::App* app) {
    app->add_option("--hops", hops, "Extraction hops H (default 2)");
    app->add_option("--top-b", top_b, "Nodes kept per hop B (default 100)");
    app->add_flag("--pos-filter", pos_filter, "Only ground nouns/verbs listed in --pos");
  }
  void add_flow(CLI::App* app) {
    app->add_option("--gamma", gamma, "Flow discount factor (default 0.5)");
    app->add_option("--aggregator", aggregator, "Flow aggregator: max | mean");
    app->add_option("--flow-hops", flow_hops, "Flow propagation hops (default 2)");
  }
  void add_train(CLI::App* app) {
    app->add_option("--steps", steps, "Total optimizer steps");
    app->add_option("--batch-size", batch_size, "Examples per step");
    app->add_option("--lr", lr, "Initial learning rate");
    app->add_option("--alpha", alpha, "Gate loss weight");
    app->add_option("--beta", beta, "Weak relevance loss weight");
    app->add_option("--seed", seed, "Random seed");
    app->add_option("--variant", variant, "full | no_flow | no_graph_encoder");
    app->add_option("--d-model", d_model, "Context encoder width");
    app->add_option("--d-graph", d_graph, "Graph encoder width");
  }
  void add_decode(CLI::App* app) {
    app->add_option("--beam", beam, "Beam size (default 3)");
    app->add_option("--max-len", max_len, "Maximum generated tokens");
  }

  RunConfig resolve(RunConfig base = {}) const {
    RunConfig c = path.empty() ? base : run_config_from_json(parse_json(io::read_file(path), path), base);
    if (hops) c.extraction.hops = *hops;
    if (top_b) c.extraction.top_b = *top_b;
    if (pos_filter) c.extraction.pos_filter = true;
    if (gamma) c.flow.gamma = *gamma;
    if (aggregator) c.flow.aggregator = aggregator_from_string(*aggregator);
    if (flow_hops) c.flow.hops = *flow_hops;
    if (steps) c.train.total_steps = *steps;
    if (batch_size) c.train.batch_size = *batch_size;
    if (lr) c.train.lr = *lr;
    if (alpha) c.train.alpha = *alpha;
    if (beta) c.train.beta = *beta;
    if (seed) c.train.seed = *seed;
    if (variant) c.model.variant = variant_from_string(*variant);
    if (d_model) c.model.d_model = *d_model;
    if (d_graph) c.model.d_graph = *d_graph;
    if (beam) c.decode.beam = *beam;
    if (max_len) c.decode.max_len = *max_len;
    c.validate();
    return c;
  }

  static nlohmann::json parse_json(const std::string& text, const std::string& origin) {
    try {
      return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::Config, "config: " + origin + ": " + e.what());
    }
  }
};

void write_config_echo(const std::string& out_path, const RunConfig& cfg) {
  io::write_file(out_path + ".config.json", to_json(cfg).dump(2) + "\n");
}

/// Writes to a file, or to stdout when the path is empty or "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path, std::ios::binary);
      if (!file_) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

std::vector<std::string> input_lines(const std::string& path) {
  std::vector<std::string> out;
  for (auto& l : io::read_lines(path))
    if (l.find_first_not_of(" \t\r") != std::string::npos) out.push_back(l);
  return out;
}

template <class T>
void check_graph(const Checkpoint<T>& ck, const KnowledgeGraph& kg) {
  if (ck.model.relations.canonical() != kg.relations().canonical())
    throw Error(ErrorCode::Format, "checkpoint/graph mismatch: relation sets differ");
}

int run_ingest(const std::string& input, const std::string& map_path, const std::string& out, const std::string& skip,
               const LexiconFlags& lexf) {
  const auto map = map_path.empty() ? default_relation_map() : RelationMap::load(map_path);
  IngestOptions opt;
  auto lex = lexf.load(false);
  opt.lemmatizer = lex.lemmatizer;
  opt.stopwords = lex.stopwords;
  auto res = ingest_file(input, map, opt);
  res.graph.save(out);
  io::write_file(skip.empty() ? out + ".skipped.tsv" : skip, res.report.skip_report());
  const auto& r = res.report;
  std::cerr << "ingest: " << r.lines << " lines, " << r.kept << " kept, " << r.skipped.size() << " malformed, "
            << r.non_english << " non-english, " << r.multi_word << " multi-word, " << r.stop_word << " stop-word, "
            << r.dropped_relation << " dropped-relation, " << r.self_loop << " self-loop; " << res.graph.num_concepts()
            << " concepts, " << res.graph.num_triples() << " triples\n";
  return 0;
}

int run_extract(const std::string& graph, const std::string& input, const std::string& out, const ConfigFlags& cf,
                const LexiconFlags& lexf) {
  const auto cfg = cf.resolve();
  const auto kg = KnowledgeGraph::load(graph);
  Grounder g(kg, lexf.load(cfg.extraction.pos_filter), cfg.extraction);
  Output o(out);
  std::size_t empty = 0;
  for (const auto& line : input_lines(input)) {
    auto sub = g.ground(tokenize(line));
    empty += sub.size() == 0;
    o.stream() << nlohmann::json{{"input", line}, {"subgraph", subgraph_to_json(sub, kg)}}.dump() << "\n";
  }
  if (empty) std::cerr << "warning: " << empty << " line(s) matched no concept (empty subgraph)\n";
  if (!out.empty() && out != "-") write_config_echo(out, cfg);
  return 0;
}

int run_train(const std::string& graph, const std::string& train_path, const std::string& dev_path, const std::string& out_dir,
              const ConfigFlags& cf, const LexiconFlags& lexf) {
  const auto cfg = cf.resolve();
  const auto kg = KnowledgeGraph::load(graph);
  Grounder g(kg, lexf.load(cfg.extraction.pos_filter), cfg.extraction);
  const auto train_pairs = load_pairs(train_path);
  std::vector<TextPair> dev_pairs;
  if (!dev_path.empty()) dev_pairs = load_pairs(dev_path);
  auto all = train_pairs;
  all.insert(all.end(), dev_pairs.begin(), dev_pairs.end());
  const Vocab vocab = build_vocab(all, g);
  const auto train = make_examples(train_pairs, vocab, g);
  const auto dev = make_examples(dev_pairs, vocab, g);

  fs::create_directories(out_dir);
  const std::string dir = out_dir + "/";
  io::write_file(dir + "config.json", to_json(cfg).dump(2) + "\n");
  auto model = GrfModel<float>::init(cfg.model, cfg.flow, vocab, kg.relations(), cfg.train.seed);
  std::ofstream log(dir + "train_log.csv");
  log << train_log_header();
  TrainHooks hooks;
  hooks.on_step = [&](const TrainLogRow& r) { log << to_csv(r); };
  hooks.on_checkpoint = [&](std::size_t step) {
    std::ostringstream name;
    name << dir << "checkpoint-" << std::setw(6) << std::setfill('0') << step << ".grfcp";
    save_checkpoint(name.str(), model, cfg);
    std::cerr << "step " << step << ": wrote " << name.str() << "\n";
  };
  if (!dev.empty()) hooks.dev_loss = [&] {
    const double nll = evaluate(model, dev).per_token_nll();
    std::cerr << "  dev per-token nll " << nll << "\n";
    return nll;
  };
  grf::train(model, train, cfg.train, hooks);
  save_checkpoint(dir + "model.grfcp", model, cfg);
  const auto e = evaluate(model, train);
  std::cerr << "train per-token nll " << e.per_token_nll() << ", accuracy " << e.accuracy() << "\n";
  return 0;
}

struct DecodeSetup {
  Checkpoint<float> ck;
  KnowledgeGraph kg;
  RunConfig cfg;
};

DecodeSetup load_for_decoding(const std::string& checkpoint, const std::string& graph, const ConfigFlags& cf) {
  DecodeSetup s{load_checkpoint<float>(checkpoint), KnowledgeGraph::load(graph), {}};
  check_graph(s.ck, s.kg);
  s.cfg = cf.resolve(s.ck.config);
  if (s.cfg.model.variant != s.ck.config.model.variant || s.cfg.model.d_model != s.ck.config.model.d_model ||
      s.cfg.model.d_graph != s.ck.config.model.d_graph)
    throw Error(ErrorCode::Config, "checkpoint/config mismatch: model settings cannot be overridden at decode time");
  s.ck.model.flow = s.cfg.flow;
  return s;
}

DecodeInput decode_input(const std::string& line, const GrfModel<float>& m, const Grounder& g) {
  const auto words = tokenize(line);
  DecodeInput in;
  in.source = m.vocab.encode(words);
  in.graph = g.ground(words);
  in.node_tokens = node_tokens(in.graph, g.kg(), m.vocab);
  return in;
}

int run_generate(const std::string& checkpoint, const std::string& graph, const std::string& input, const std::string& out,
                 std::size_t nbest, const ConfigFlags& cf, const LexiconFlags& lexf) {
  auto s = load_for_decoding(checkpoint, graph, cf);
  Grounder g(s.kg, lexf.load(s.cfg.extraction.pos_filter), s.cfg.extraction);
  Output o(out);
  for (const auto& line : input_lines(input)) {
    const auto in = decode_input(line, s.ck.model, g);
    auto hyps = decode_beam(s.ck.model, in, s.cfg.decode.beam, s.cfg.decode.max_len);
    if (nbest == 0) {
      o.stream() << (hyps.empty() ? "" : s.ck.model.vocab.decode(hyps.front().tokens)) << "\n";
      continue;
    }
    for (std::size_t k = 0; k < std::min(nbest, hyps.size()); ++k)
      o.stream() << k + 1 << '\t' << hyps[k].logprob << '\t' << s.ck.model.vocab.decode(hyps[k].tokens) << "\n";
    o.stream() << "\n";
  }
  if (!out.empty() && out != "-") write_config_echo(out, s.cfg);
  return 0;
}

int run_trace(const std::string& checkpoint, const std::string& graph, const std::string& input, const std::string& out,
              std::size_t top_k, const ConfigFlags& cf, const LexiconFlags& lexf) {
  auto s = load_for_decoding(checkpoint, graph, cf);
  if (s.cfg.flow.aggregator != Aggregator::Max)
    throw Error(ErrorCode::UnsupportedTrace, "trace: back-pointers exist only for the max aggregator");
  Grounder g(s.kg, lexf.load(s.cfg.extraction.pos_filter), s.cfg.extraction);
  Output o(out);
  for (const auto& line : input_lines(input)) {
    const auto in = decode_input(line, s.ck.model, g);
    o.stream() << "# " << line << "\n";
    const auto steps = trace_greedy(s.ck.model, in, s.cfg.decode.max_len, top_k);
    for (std::size_t t = 0; t < steps.size(); ++t) {
      o.stream() << "step " << t + 1 << "\t" << s.ck.model.vocab.token(steps[t].token) << "\tgate=" << steps[t].gate << "\n";
      for (const auto& p : steps[t].paths) o.stream() << "  " << format_trace(p, in.graph, s.kg) << "\n";
    }
    o.stream() << "\n";
  }
  return 0;
}

int run_eval(const std::string& hyp_path, const std::string& ref_path, bool smooth, const std::string& out) {
  const auto hyps = io::read_lines(hyp_path);
  const auto refs = io::read_lines(ref_path);
  if (hyps.size() != refs.size())
    throw Error(ErrorCode::Format, "eval: " + std::to_string(hyps.size()) + " hypotheses vs " + std::to_string(refs.size()) +
                                       " reference lines");
  std::vector<EvalPair> pairs;
  std::vector<Words> hyp_words;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    EvalPair p{tokenize(hyps[i]), {}};
    for (const auto& r : io::split(refs[i], '\t')) p.references.push_back(tokenize(r));
    hyp_words.push_back(p.hypothesis);
    pairs.push_back(std::move(p));
  }
  Output o(out);
  o.stream() << "metric\tvalue\n";
  for (std::size_t n = 1; n <= 4; ++n) o.stream() << "bleu-" << n << "\t" << bleu(pairs, n, smooth) << "\n";
  for (std::size_t n = 1; n <= 3; ++n) o.stream() << "distinct-" << n << "\t" << distinct(hyp_words, n) << "\n";
  return 0;
}

int run_synth(const SynthConfig& sc, const std::string& out_dir) {
  const auto c = synth_corpus(sc);
  fs::create_directories(out_dir);
  const std::string dir = out_dir + "/";
  io::write_file(dir + "kg.tsv", c.kg_tsv());
  io::write_file(dir + "train.jsonl", pairs_to_jsonl(c.train));
  io::write_file(dir + "heldout.jsonl", pairs_to_jsonl(c.heldout));
  io::write_file(dir + "config.json", to_json(synth_run_config()).dump(2) + "\n");
  std::cerr << "synth: " << c.triples.size() << " triples, " << c.train.size() << " train / " << c.heldout.size()
            << " held-out pairs in " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-grounded generation with multi-hop reasoning flow"};
  app.require_subcommand(1);
  LexiconFlags lexf;
  ConfigFlags cf;
  std::string graph, input, out, checkpoint;

  auto* ingest_cmd = app.add_subcommand("ingest", "Build a graph file from a triple dump");
  std::string map_path, skip;
  ingest_cmd->add_option("--input", input, "ConceptNet assertions or head<TAB>rel<TAB>tail[<TAB>weight] TSV")->required();
  ingest_cmd->add_option("--relation-map", map_path, "raw<TAB>group[<TAB>reverse]; default built-in 17-group map");
  ingest_cmd->add_option("--out", out, "Graph file to write")->required();
  ingest_cmd->add_option("--skip-report", skip, "Malformed-line report (default <out>.skipped.tsv)");
  lexf.add(ingest_cmd);

  auto* extract_cmd = app.add_subcommand("extract", "Ground text lines and print one subgraph JSON per line");
  extract_cmd->add_option("--graph", graph, "Graph file")->required();
  extract_cmd->add_option("--input", input, "Text, one example per line")->required();
  extract_cmd->add_option("--out", out, "Output JSONL (default stdout)");
  extract_cmd->add_option("--config", cf.path, "RunConfig JSON");
  cf.add_extraction(extract_cmd);
  lexf.add(extract_cmd);

  auto* train_cmd = app.add_subcommand("train", "Train a model; writes checkpoints, a CSV log and the effective config");
  std::string train_path, dev_path;
  train_cmd->add_option("--graph", graph, "Graph file")->required();
  train_cmd->add_option("--train", train_path, "Training JSONL ({\"src\", \"tgt\"} per line)")->required();
  train_cmd->add_option("--dev", dev_path, "Development JSONL (early stopping with train.patience)");
  train_cmd->add_option("--out-dir", out, "Output directory")->required();
  train_cmd->add_option("--config", cf.path, "RunConfig JSON");
  cf.add_extraction(train_cmd);
  cf.add_flow(train_cmd);
  cf.add_train(train_cmd);
  lexf.add(train_cmd);

  std::size_t nbest = 0, top_k = 5;
  auto* gen_cmd = app.add_subcommand("generate", "Decode one hypothesis per input line");
  gen_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  gen_cmd->add_option("--graph", graph, "Graph file")->required();
  gen_cmd->add_option("--input", input, "Source text, one per line")->required();
  gen_cmd->add_option("--out", out, "Output file (default stdout)");
  gen_cmd->add_option("--nbest", nbest, "Print up to N ranked hypotheses as rank<TAB>logprob<TAB>text");
  gen_cmd->add_option("--config", cf.path, "RunConfig JSON overriding the checkpoint's decode/flow/extraction settings");
  cf.add_extraction(gen_cmd);
  cf.add_flow(gen_cmd);
  cf.add_decode(gen_cmd);
  lexf.add(gen_cmd);

  auto* trace_cmd = app.add_subcommand("trace", "Greedy decode with per-step gate values and top-k flow paths");
  trace_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  trace_cmd->add_option("--graph", graph, "Graph file")->required();
  trace_cmd->add_option("--input", input, "Source text, one per line")->required();
  trace_cmd->add_option("--out", out, "Output file (default stdout)");
  trace_cmd->add_option("--top-k", top_k, "Concepts listed per step");
  trace_cmd->add_option("--config", cf.path, "RunConfig JSON");
  cf.add_extraction(trace_cmd);
  cf.add_flow(trace_cmd);
  cf.add_decode(trace_cmd);
  lexf.add(trace_cmd);

  std::string hyp_path, ref_path;
  bool smooth = false;
  auto* eval_cmd = app.add_subcommand("eval", "Corpus BLEU-1..4 and Distinct-1..3");
  eval_cmd->add_option("--hyp", hyp_path, "Hypotheses, one per line")->required();
  eval_cmd->add_option("--ref", ref_path, "References, one line per hypothesis; ref1<TAB>ref2...")->required();
  eval_cmd->add_flag("--smooth", smooth, "Add-one smoothing for orders above 1");
  eval_cmd->add_option("--out", out, "Output file (default stdout)");

  SynthConfig sc;
  auto* synth_cmd = app.add_subcommand("synth", "Write the synthetic KG, corpus and run config");
  synth_cmd->add_option("--seed", sc.seed, "Corpus seed");
  synth_cmd->add_option("--train-sources", sc.train_sources, "Training clusters (4 examples each)");
  synth_cmd->add_option("--heldout-sources", sc.heldout_sources, "Held-out clusters (4 examples each)");
  synth_cmd->add_option("--branches", sc.branches, "Branches per cluster");
  synth_cmd->add_option("--out-dir", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*ingest_cmd) return run_ingest(input, map_path, out, skip, lexf);
    if (*extract_cmd) return run_extract(graph, input, out, cf, lexf);
    if (*train_cmd) return run_train(graph, train_path, dev_path, out, cf, lexf);
    if (*gen_cmd) return run_generate(checkpoint, graph, input, out, nbest, cf, lexf);
    if (*trace_cmd) return run_trace(checkpoint, graph, input, out, top_k, cf, lexf);
    if (*eval_cmd) return run_eval(hyp_path, ref_path, smooth, out);
    if (*synth_cmd) return run_synth(sc, out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
