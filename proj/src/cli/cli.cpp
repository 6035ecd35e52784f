/* Copyright 2026 The VRDial Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "vrdial/cli/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "vrdial/corpus/corpus.hpp"
#include "vrdial/error.hpp"
#include "vrdial/eval/runner.hpp"
#include "vrdial/kg/graph.hpp"
#include "vrdial/model/checkpoint.hpp"
#include "vrdial/model/infer.hpp"
#include "vrdial/train/trainer.hpp"

namespace vrdial::cli {
namespace {

constexpr int kMaxPaths = 3;

std::string in_data(const std::string& file) {
  return (std::filesystem::path(data_dir()) / file).string();
}

std::ofstream open_out(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  return out;
}

kg::KnowledgeGraph load_kg(const std::string& path) { return kg::load_graph_file(path); }

struct Loaded {
  std::unique_ptr<model::Model> model;
  kg::KnowledgeGraph kg;
};

Loaded load_model(const std::string& checkpoint, const std::string& kg_path) {
  Loaded l;
  l.kg = load_kg(kg_path);
  l.model = model::load_checkpoint(checkpoint).model;
  l.model->check_graph(l.kg);
  return l;
}

std::string join_ids(const model::TokenSpace& space, std::span<const int> ids) {
  const auto words = space.texts(ids);
  return corpus::join(words);
}

std::string category_name(int c) {
  if (c >= 0 && c < 4) return std::string(corpus::to_string(static_cast<corpus::ActionCategory>(c)));
  return "category_" + std::to_string(c);
}

int cmd_build_kg(const std::string& triplets, const std::string& out_path, std::ostream& out) {
  std::ifstream in(triplets);
  if (!in) throw Error("cannot open triplets '" + triplets + "'");
  const auto rows = kg::load_triplets(in);
  const auto kg = kg::build_global_graph(rows);
  auto file = open_out(out_path);
  kg::save_graph(file, kg);
  out << "entities " << kg.entity_count() << "\nrelations " << kg.relation_count() << "\nedges "
      << kg.edge_count() << '\n';
  return kOk;
}

int cmd_synth(const std::string& kg_path, std::uint64_t seed, const corpus::SynthParams& p,
              const std::string& out_path, std::ostream& out) {
  const auto kg = load_kg(kg_path);
  const auto sessions = corpus::synth_corpus(kg, seed, p);
  auto file = open_out(out_path);
  corpus::save_corpus(file, sessions);
  out << "sessions " << sessions.size() << '\n';
  return kOk;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& corpus_path, const std::string& kg_path, const std::string& out_dir,
              std::ostream& out, std::ostream& err) {
  train::RunConfig c = config_path.empty() ? train::RunConfig{} : train::load_run_config(config_path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || !train::set_run_field(c, kv.substr(0, eq), kv.substr(eq + 1))) {
      err << "error: bad --set '" << kv << "'\n";
      return kUsage;
    }
  }
  c.validate();
  const auto kg = load_kg(kg_path);
  const auto sessions = corpus::load_corpus_file(corpus_path);
  if (sessions.empty()) {
    err << "error: corpus '" << corpus_path << "' is empty\n";
    return kEmptySplit;
  }
  train::TrainOptions opt;
  opt.out_dir = out_dir;
  opt.progress = &out;
  auto r = train::train(c, sessions, kg, opt);
  if (r.aborted) {
    err << "error: training aborted: " << r.abort_reason << '\n';
    if (!r.checkpoint.empty()) err << "last checkpoint: " << r.checkpoint << '\n';
    return kFailure;
  }
  out << "checkpoint " << r.checkpoint << '\n';
  if (!r.validation.empty() && r.validation.back().report) {
    out << eval::to_json(*r.validation.back().report).dump() << '\n';
  }
  return kOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& corpus_path,
             const std::string& kg_path, const std::string& embeddings, const std::string& csv,
             std::ostream& out, std::ostream& err) {
  auto l = load_model(checkpoint, kg_path);
  const auto sessions = corpus::load_corpus_file(corpus_path);
  if (sessions.empty()) {
    err << "error: test split '" << corpus_path << "' is empty\n";
    return kEmptySplit;
  }
  const auto outputs = eval::predict_corpus(*l.model, l.kg, sessions);
  const auto table = embeddings.empty() ? eval::model_embeddings(*l.model)
                                        : eval::EmbeddingTable::load_text(embeddings);
  if (!csv.empty()) {
    auto file = open_out(csv);
    eval::write_csv(file, outputs);
  }
  out << eval::to_json(eval::score_outputs(outputs, l.kg, table)).dump(2) << '\n';
  return kOk;
}

int cmd_chat(const std::string& checkpoint, const std::string& kg_path, std::istream& in,
             std::ostream& out) {
  auto l = load_model(checkpoint, kg_path);
  const model::Model& m = *l.model;
  model::TokenSpace space(m.vocab());
  model::DialogueHistory history;
  std::string line;
  while (std::getline(in, line)) {
    const auto tokens = corpus::tokenize(line);
    if (tokens.empty()) continue;
    if (tokens.size() == 1 && tokens[0] == "/quit") break;
    if (tokens.size() == 1 && tokens[0] == "/reset") {
      history.reset();
      out << "(reset)\n";
      continue;
    }
    std::vector<int> patient;
    for (const auto& w : tokens) patient.push_back(space.intern(w));
    const auto pred = model::infer_turn(m, l.kg, space, history, patient);
    out << "state: " << join_ids(space, pred.state) << '\n';
    out << "action: " << category_name(pred.category) << " | "
        << join_ids(space, pred.keywords) << '\n';
    std::vector<std::string> paths;
    for (const auto& p : pred.trace) {
      auto text = model::format_path(p);
      if (std::find(paths.begin(), paths.end(), text) != paths.end()) continue;
      paths.push_back(std::move(text));
      if (static_cast<int>(paths.size()) == kMaxPaths) break;
    }
    for (const auto& p : paths) out << "path: " << p << '\n';
    out << "response: " << join_ids(space, pred.response) << '\n';
    model::advance(history, pred, pred.response);
  }
  return kOk;
}

int cmd_inspect(const std::string& checkpoint, std::ostream& out) {
  auto header = model::read_checkpoint_header(checkpoint);
  nlohmann::ordered_json view;
  view["version"] = header.at("version");
  view["step"] = header.at("step");
  view["config"] = header.at("config");
  view["vocab_size"] = header.at("vocab").size() + corpus::Vocabulary::kReserved;
  view["relations"] = header.at("relations");
  std::size_t count = 0;
  for (const auto& p : header.at("params")) {
    count += p.at("rows").get<std::size_t>() * p.at("cols").get<std::size_t>();
  }
  view["parameters"] = count;
  view["extra"] = header.at("extra");
  out << view.dump(2) << '\n';
  return kOk;
}

}  // namespace

std::string data_dir() {
  const char* env = std::getenv(kDataDirEnv);
  return env != nullptr && *env != '\0' ? std::string(env) : std::string("data");
}

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Dual-latent medical dialogue model"};
  app.require_subcommand(1);

  std::string triplets = in_data("sample_kg.tsv");
  std::string kg_path = in_data("kg.json");
  std::string corpus_path = in_data("corpus.jsonl");
  std::string out_path;
  std::string config_path;
  std::string checkpoint;
  std::string embeddings;
  std::string csv;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  corpus::SynthParams synth;

  auto* build = app.add_subcommand("build-kg", "Build a graph document from triplets");
  build->add_option("--triplets", triplets, "Triplet TSV");
  build->add_option("--out", out_path, "Output graph file")->required();

  auto* gen = app.add_subcommand("synth", "Generate a synthetic corpus");
  gen->add_option("--kg", kg_path, "Graph file");
  gen->add_option("--seed", seed, "Generator seed");
  gen->add_option("--sessions", synth.sessions, "Number of sessions");
  gen->add_option("--turns", synth.turns_per_session, "Turns per session");
  gen->add_option("--symptom-rate", synth.symptom_rate, "Probability of confirming a symptom");
  gen->add_option("--out", out_path, "Output corpus (JSON lines)")->required();

  auto* tr = app.add_subcommand("train", "Train a model");
  tr->add_option("--config", config_path, "Run configuration file");
  tr->add_option("--set", overrides, "Override a configuration key (key=value)");
  tr->add_option("--corpus", corpus_path, "Training corpus");
  tr->add_option("--kg", kg_path, "Graph file");
  tr->add_option("--out", out_path, "Output directory")->required();

  auto* ev = app.add_subcommand("eval", "Score a checkpoint on a corpus");
  ev->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  ev->add_option("--corpus", corpus_path, "Test corpus");
  ev->add_option("--kg", kg_path, "Graph file");
  ev->add_option("--embeddings", embeddings, "Word vectors for EA/EG (text format)");
  ev->add_option("--csv", csv, "Write per-turn predictions");

  auto* chat = app.add_subcommand("chat", "Interactive session");
  chat->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  chat->add_option("--kg", kg_path, "Graph file");

  auto* insp = app.add_subcommand("inspect", "Print checkpoint metadata");
  insp->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n' << app.help();
    return kUsage;
  }

  try {
    if (*build) return cmd_build_kg(triplets, out_path, out);
    if (*gen) return cmd_synth(kg_path, seed, synth, out_path, out);
    if (*tr) return cmd_train(config_path, overrides, corpus_path, kg_path, out_path, out, err);
    if (*ev) return cmd_eval(checkpoint, corpus_path, kg_path, embeddings, csv, out, err);
    if (*chat) return cmd_chat(checkpoint, kg_path, in, out);
    if (*insp) return cmd_inspect(checkpoint, out);
  } catch (const ConfigMismatch& e) {
    err << "error: " << e.what() << '\n';
    return kMismatch;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

}  // namespace vrdial::cli
