// Copyright 2026 The polyseq Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// polyseq command-line tool.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "polyseq/cli_io.hpp"
#include "polyseq/errors.hpp"
#include "polyseq/harness.hpp"
#include "polyseq/model.hpp"

namespace fs = std::filesystem;
using namespace polyseq;

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> settings;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::string checkpoint;
  std::string mode;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "key=value config file");
  cmd->add_option("--set", o.settings, "override one config key (key=value)");
  cmd->add_option("--seed", o.seed, "seed override");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--checkpoint", o.checkpoint, "checkpoint path");
  cmd->add_option("--mode", o.mode, "decoder variant: regression|classification");
}

RunConfig resolve(const CommonOptions& o) {
  RunConfig c = o.config_path.empty() ? RunConfig{} : load_run_config(o.config_path);
  for (const std::string& s : o.settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    set_config_value(c, s.substr(0, eq), s.substr(eq + 1));
  }
  if (!o.mode.empty()) c.train.model.mode = parse_mode(o.mode);
  return c;
}

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

// Loads a checkpoint and folds its model settings into the config so the echo
// reflects what actually ran.
LoadedCheckpoint load_for(RunConfig& c, const CommonOptions& o) {
  if (o.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  LoadedCheckpoint ck = load_checkpoint(o.checkpoint);
  if (!o.mode.empty() && ck.model->config().mode != parse_mode(o.mode)) {
    throw ConfigError(std::string("checkpoint decoder is ") + mode_name(ck.model->config().mode) + ", --mode asked for " +
                      o.mode);
  }
  c.train.model = ck.model->config();
  c.data.image_size = c.train.model.image_size;
  return ck;
}

int cmd_gen_data(const CommonOptions& o, const std::string& split, bool video) {
  RunConfig c = resolve(o);
  if (o.seed) (split == "test" ? c.test_seed : c.data.seed) = *o.seed;
  c.validate();
  DatasetConfig d = c.data;
  if (split == "test") {
    d.count = c.test_count;
    d.seed = c.test_seed;
    d.id_prefix = "t";
  } else if (split != "train") {
    throw ConfigError("--split must be train or test");
  }
  const auto samples = video ? generate_translating_clip(d, c.video_frames) : generate_dataset(d);
  write_dataset(o.out, samples, run_config_text(c));
  std::printf("wrote %zu samples to %s\n", samples.size(), path_in(o.out, "annotations.jsonl").c_str());
  return 0;
}

int cmd_train(const CommonOptions& o, const std::string& data_path) {
  RunConfig c = resolve(o);
  if (o.seed) c.train.seed = *o.seed;
  c.validate();
  const auto data = read_dataset(data_path);
  const std::string ckpt = o.checkpoint.empty() ? path_in(o.out, "model.ckpt") : o.checkpoint;
  const std::string echo = run_config_text(c);
  std::string log_text = nlohmann::json{{"config", echo}}.dump() + "\n";
  const std::string log_path = path_in(o.out, "train_log.jsonl");
  const TrainResult r = train(
      c.train, data,
      [&](const EpochLog& e, const Model&) {
        log_text += epoch_log_json(e) + "\n";
        write_file_atomic(log_path, log_text);
        std::printf("epoch %d total %.5f coordinate %.5f classification %.5f fixed %.5f lr %.3g (%.1fs)\n", e.epoch,
                    e.total, e.coordinate, e.classification, e.fixed_batch_loss, e.lr, e.seconds);
        std::fflush(stdout);
      },
      ckpt);
  write_file_atomic(log_path, log_text);
  save_checkpoint(ckpt, *r.model, echo);
  std::printf("checkpoint %s\n", ckpt.c_str());
  return 0;
}

int cmd_infer(const CommonOptions& o, const std::string& image_path, const std::string& query, bool dump_tok,
              bool dump_attn) {
  RunConfig c = resolve(o);
  LoadedCheckpoint ck = load_for(c, o);
  const RgbImage image = read_ppm(image_path);
  const auto words = split_words(query);
  const InferenceResult r = infer(*ck.model, image, words, dump_attn);

  write_pgm(path_in(o.out, "mask.pgm"), r.mask);
  nlohmann::ordered_json j;
  j["config"] = run_config_text(c);
  j["query"] = query;
  j["box"] = {r.box.x1, r.box.y1, r.box.x2, r.box.y2};
  nlohmann::ordered_json polys = nlohmann::ordered_json::array();
  for (const Polygon& p : r.polygons.polygons) {
    std::vector<double> flat;
    for (const Point& v : p.vertices) {
      flat.push_back(v.x);
      flat.push_back(v.y);
    }
    polys.push_back(flat);
  }
  j["polygons"] = std::move(polys);
  j["tokens"] = r.tokens.size();
  j["overflow"] = r.overflow;
  j["box_reordered"] = r.box_reordered;
  j["mask_pixels"] = r.mask.count();
  write_file_atomic(path_in(o.out, "result.json"), j.dump(2) + "\n");
  if (dump_tok) write_file_atomic(path_in(o.out, "tokens.txt"), dump_tokens(r.tokens));
  if (dump_attn) {
    nlohmann::ordered_json a;
    a["config"] = run_config_text(c);
    a["grid"] = ck.model->config().grid();
    a["query_length"] = words.size();
    a["cross_attention"] = r.attention;  // [step][layer][head][memory position]
    write_file_atomic(path_in(o.out, "attention.json"), a.dump() + "\n");
  }
  std::printf("box %.4f %.4f %.4f %.4f, %zu polygon(s), %zu mask pixels%s\n", r.box.x1, r.box.y1, r.box.x2, r.box.y2,
              r.polygons.polygons.size(), r.mask.count(), r.overflow ? ", overflow" : "");
  return 0;
}

class FilePredictor : public Predictor {
 public:
  explicit FilePredictor(const std::vector<AnnotationRecord>& records) {
    for (const auto& r : records) by_id_.emplace(r.id, to_prediction(r));
  }
  Prediction predict(const Sample& s) const override {
    const auto it = by_id_.find(s.id);
    if (it == by_id_.end()) throw ShapeMismatch("no prediction for sample '" + s.id + "'");
    return it->second;
  }

 private:
  std::map<std::string, Prediction> by_id_;
};

int cmd_eval(const CommonOptions& o, const std::string& data_path, const std::string& predictions) {
  RunConfig c = resolve(o);
  const auto data = read_dataset(data_path);
  EvalReport report;
  if (!predictions.empty()) {
    const FilePredictor p(read_annotations(predictions));
    report = evaluate(data, p, c.threads);
    report.mode = "predictions";
  } else {
    LoadedCheckpoint ck = load_for(c, o);
    report = evaluate(data, ModelPredictor(*ck.model), c.threads);
    report.mode = mode_name(ck.model->config().mode);
  }
  report.config_echo = run_config_text(c);
  write_report(report, path_in(o.out, "report.json"));
  std::printf("mIoU %.4f oIoU %.4f Prec@0.5 %.4f J %.4f F %.4f over %zu samples\n", report.aggregate.miou,
              report.aggregate.oiou, report.aggregate.prec_at_05, report.aggregate.mean_j, report.aggregate.mean_f,
              report.aggregate.count);
  return 0;
}

int cmd_eval_video(const CommonOptions& o, const std::string& data_path) {
  RunConfig c = resolve(o);
  LoadedCheckpoint ck = load_for(c, o);
  const auto frames = read_dataset(data_path);
  for (const Sample& f : frames) {
    if (f.query != frames.front().query) throw ConfigError("frame '" + f.id + "' has a different query");
  }
  const VideoReport r = evaluate_video(frames, ModelPredictor(*ck.model));
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    ids.push_back(frames[i].id);
    write_pgm(path_in(o.out, "masks/" + frames[i].id + ".pgm"), r.masks[i]);
  }
  write_file_atomic(path_in(o.out, "video_report.json"), video_report_json(r, ids, run_config_text(c)));
  std::printf("mean J %.4f mean F %.4f over %zu frames\n", r.mean_j, r.mean_f, frames.size());
  return 0;
}

int cmd_ablate(const CommonOptions& o) {
  RunConfig c = resolve(o);
  if (o.seed) c.ablation_seeds = {*o.seed};
  c.validate();
  const AblationResult r = ablate_decoder(c.ablation(), [](const std::string& line) {
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
  });
  const std::string table = format_ablation_table(r);
  write_file_atomic(path_in(o.out, "ablation.txt"), table);
  write_file_atomic(path_in(o.out, "ablation.json"), ablation_json(r, run_config_text(c)));
  std::fputs(table.c_str(), stdout);
  return 0;
}

std::string one_line(std::string s) {
  for (char& ch : s) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Polygon-sequence referring segmentation toolkit"};
  app.require_subcommand(1);

  CommonOptions gen_o, train_o, infer_o, eval_o, video_o, ablate_o;
  std::string split = "train";
  bool video = false;
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  add_common(gen, gen_o);
  gen->add_option("--split", split, "train|test (test uses test_count and test_seed)");
  gen->add_flag("--video", video, "generate a translating-shape clip instead");

  std::string train_data;
  auto* tr = app.add_subcommand("train", "train a model");
  add_common(tr, train_o);
  tr->add_option("--data", train_data, "annotations.jsonl or its directory")->required();

  std::string image_path, query;
  bool dump_tok = false, dump_attn = false;
  auto* inf = app.add_subcommand("infer", "segment one image");
  add_common(inf, infer_o);
  inf->add_option("--image", image_path, "PPM image")->required();
  inf->add_option("--query", query, "referring expression")->required();
  inf->add_flag("--dump-tokens", dump_tok, "write tokens.txt");
  inf->add_flag("--dump-attention", dump_attn, "write attention.json");

  std::string eval_data, predictions;
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint or a predictions file");
  add_common(ev, eval_o);
  ev->add_option("--data", eval_data, "annotations.jsonl or its directory")->required();
  ev->add_option("--predictions", predictions, "predictions in annotation format");

  std::string video_data;
  auto* evv = app.add_subcommand("eval-video", "frame-by-frame evaluation of a clip");
  add_common(evv, video_o);
  evv->add_option("--data", video_data, "annotations.jsonl (or directory) of ordered frames")->required();

  auto* abl = app.add_subcommand("ablate-decoder", "regression vs classification decoder");
  add_common(abl, ablate_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error=UsageError message=" << one_line(e.what()) << "\n";
    return 1;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_o, split, video);
    if (tr->parsed()) return cmd_train(train_o, train_data);
    if (inf->parsed()) return cmd_infer(infer_o, image_path, query, dump_tok, dump_attn);
    if (ev->parsed()) return cmd_eval(eval_o, eval_data, predictions);
    if (evv->parsed()) return cmd_eval_video(video_o, video_data);
    if (abl->parsed()) return cmd_ablate(ablate_o);
  } catch (const Error& e) {
    std::cerr << "error=" << e.kind() << " message=" << one_line(e.what()) << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error=Internal message=" << one_line(e.what()) << "\n";
    return 1;
  }
  return 1;
}
