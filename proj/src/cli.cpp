#include "scenu/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "scenu/config.hpp"
#include "scenu/derive.hpp"
#include "scenu/dsl.hpp"
#include "scenu/evaluation.hpp"
#include "scenu/fixtures.hpp"
#include "scenu/json_io.hpp"
#include "scenu/physics.hpp"
#include "scenu/validate.hpp"

namespace scenu {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Parse failure of an input document; the diagnostics are printed as-is.
struct InputError : std::runtime_error {
  std::vector<std::string> lines;
  InputError(const std::string& what, std::vector<std::string> l) : std::runtime_error(what), lines(std::move(l)) {}
};

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << content;
    return;
  }
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw IoError("cannot write '" + path + "'");
  os << content;
}

bool looks_like_json(const std::string& text) {
  const auto pos = text.find_first_not_of(" \t\r\n");
  return pos != std::string::npos && text[pos] == '{';
}

json parse_json(const std::string& text, const std::string& path) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(path + ": not valid JSON", {e.what()});
  }
}

// A description file in canonical JSON or the annotation language.
struct Loaded {
  ScenarioDescription description;
  std::optional<ScenarioAnticipation> anticipation;
  std::vector<Action> actions;
  std::vector<Diagnostic> warnings;
};

Loaded load_description(const std::string& path) {
  const std::string text = read_file(path);
  Loaded l;
  if (looks_like_json(text)) {
    const json j = parse_json(text, path);
    try {
      l.description = description_from_json(j);
    } catch (const StructureError& e) {
      throw InputError(path + ": malformed description", {e.what()});
    }
    return l;
  }
  auto r = parse_annotation_text(text);
  if (!r.ok()) {
    std::vector<std::string> lines;
    for (const auto& d : r.errors) lines.push_back(path + ":" + to_string(d));
    throw InputError(path + ": " + std::to_string(r.errors.size()) + " parse error(s)", lines);
  }
  l.description = std::move(r.value->description);
  l.anticipation = std::move(r.value->anticipation);
  l.actions = std::move(r.value->actions);
  l.warnings = std::move(r.value->warnings);
  return l;
}

ScenarioAnticipation load_anticipation(const std::string& path) {
  const std::string text = read_file(path);
  if (looks_like_json(text)) {
    try {
      return anticipation_from_json(parse_json(text, path));
    } catch (const StructureError& e) {
      throw InputError(path + ": malformed anticipation", {e.what()});
    }
  }
  auto r = parse_annotation_text(text);
  if (!r.ok() || !r.value->anticipation) {
    std::vector<std::string> lines;
    for (const auto& d : r.errors) lines.push_back(path + ":" + to_string(d));
    if (lines.empty()) lines.push_back(path + ": no [ANTICIPATE] block");
    throw InputError(path + ": no anticipation", lines);
  }
  return *r.value->anticipation;
}

std::string report_text(const ValidationReport& r) {
  std::ostringstream o;
  if (r.ok()) o << "valid\n";
  for (const auto& v : r.violations) o << "error   " << v.code << " " << v.path << ": " << v.message << "\n";
  for (const auto& v : r.warnings) o << "warning " << v.code << " " << v.path << ": " << v.message << "\n";
  return o.str();
}

std::string actions_text(const std::vector<Action>& actions) {
  std::ostringstream o;
  for (const auto& a : actions) {
    o << to_string(a.verb);
    for (const auto& j : a.justification) o << " " << j;
    o << "\n";
  }
  return o.str();
}

struct ScoreJob {
  std::string scenario_dir;
  std::string gt;
  std::string gt_anticipation;
  std::string candidate;
};

struct ScoreOutput {
  std::string scenario;
  std::string candidate;
  UnderstandingScore score;
  std::vector<std::string> candidate_violations;
};

ScoreOutput run_score(const ScoreJob& job, const std::string& candidate_anticipation, const RunConfig& cfg) {
  Loaded gt = load_description(job.gt);
  std::optional<ScenarioAnticipation> gt_ant = gt.anticipation;
  if (!job.gt_anticipation.empty()) gt_ant = load_anticipation(job.gt_anticipation);
  Loaded cand = load_description(job.candidate);
  std::optional<ScenarioAnticipation> cand_ant = cand.anticipation;
  if (!candidate_anticipation.empty()) cand_ant = load_anticipation(candidate_anticipation);

  const auto gt_report = validate_description(gt.description);
  if (!gt_report.ok()) {
    std::vector<std::string> lines;
    for (const auto& v : gt_report.violations) lines.push_back(v.code + " " + v.path + ": " + v.message);
    throw InputError(job.gt + ": ground truth does not validate", lines);
  }
  ScoreOutput o;
  o.scenario = gt.description.id;
  o.candidate = fs::path(job.candidate).stem().string();
  for (const auto& v : validate_description(cand.description).violations) o.candidate_violations.push_back(v.code);
  o.score = score_understanding(gt.description, gt_ant ? &*gt_ant : nullptr, cand.description,
                                cand_ant ? &*cand_ant : nullptr, cfg.scoring);
  return o;
}

json score_json(const ScoreOutput& o, const std::string& hash) {
  json j = to_json(o.score, o.scenario, o.candidate, hash);
  j["candidate_violations"] = o.candidate_violations;
  return j;
}

// Subdirectories holding gt.json plus candidate*.sdl / candidate*.json files.
std::vector<ScoreJob> batch_jobs(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: '" + dir + "'");
  std::vector<ScoreJob> jobs;
  std::vector<fs::path> subdirs;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory()) subdirs.push_back(e.path());
  }
  std::sort(subdirs.begin(), subdirs.end());
  for (const auto& sd : subdirs) {
    if (!fs::exists(sd / "gt.json")) continue;
    std::vector<fs::path> cands;
    for (const auto& e : fs::directory_iterator(sd)) {
      const std::string name = e.path().filename().string();
      if (name.rfind("candidate", 0) == 0 && (e.path().extension() == ".sdl" || e.path().extension() == ".json")) {
        cands.push_back(e.path());
      }
    }
    std::sort(cands.begin(), cands.end());
    const fs::path ant = sd / "gt_anticipation.json";
    for (const auto& c : cands) {
      jobs.push_back({sd.string(), (sd / "gt.json").string(), fs::exists(ant) ? ant.string() : "", c.string()});
    }
  }
  return jobs;
}

void print_input_error(const InputError& e, std::ostream& err) {
  err << "error: " << e.what() << "\n";
  for (const auto& l : e.lines) err << "  " << l << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Scenario understanding toolkit: validate, derive, predict, score, fixtures.", "scenu"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  std::string config_path;
  std::vector<std::string> overrides;
  std::string format = "text";
  app.add_option("--config", config_path, "JSON config file (default: $SCENU_CONFIG)");
  app.add_option("--set", overrides, "Override one threshold, e.g. --set geometry.near_radius=8")->take_last()
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  app.add_option("--format", format, "Report format")->check(CLI::IsMember({"text", "json", "dsl"}));

  auto* validate = app.add_subcommand("validate", "Check a description (JSON or annotation text)");
  std::string validate_path;
  validate->add_option("path", validate_path, "Description file")->required();

  auto* derive = app.add_subcommand("derive", "Ground-truth description from a trajectory log");
  std::string log_path, context_path, derive_out;
  derive->add_option("--log", log_path, "Trajectory log")->required();
  derive->add_option("--context", context_path, "Scene context JSON");
  derive->add_option("-o,--output", derive_out, "Output file (default: stdout)");

  auto* predict = app.add_subcommand("predict", "Anticipation over (0, horizon] from a description");
  std::string predict_path, predict_out;
  std::optional<double> horizon, dt;
  predict->add_option("description", predict_path, "Description file")->required();
  predict->add_option("--horizon", horizon, "Horizon T_e in seconds");
  predict->add_option("--dt", dt, "Step in seconds");
  predict->add_option("-o,--output", predict_out, "Output file (default: stdout)");

  auto* score = app.add_subcommand("score", "Score a candidate against ground truth");
  std::string gt_path, gt_ant_path, cand_path, cand_ant_path, score_out, batch_dir;
  unsigned jobs = 1;
  score->add_option("--gt", gt_path, "Ground-truth description");
  score->add_option("--gt-anticipation", gt_ant_path, "Ground-truth anticipation");
  score->add_option("--candidate", cand_path, "Candidate description (annotation text or JSON)");
  score->add_option("--candidate-anticipation", cand_ant_path, "Candidate anticipation, if not in the candidate file");
  score->add_option("--out", score_out, "Directory for report.json and report.csv");
  score->add_option("--dir", batch_dir, "Batch mode: score every candidate* file under <dir>/<scenario>/");
  score->add_option("--jobs", jobs, "Worker threads for batch mode")->check(CLI::Range(1u, 256u));

  auto* decide_cmd = app.add_subcommand("decide", "Task decision from a description and its anticipation");
  std::string decide_path, decide_ant, task_name = "decision";
  bool decide_predict = false;
  decide_cmd->add_option("description", decide_path, "Description file")->required();
  decide_cmd->add_option("--anticipation", decide_ant, "Anticipation file");
  decide_cmd->add_option("--task", task_name, "Task kind")
      ->check(CLI::IsMember({"perception", "decision", "interaction", "learning"}));
  decide_cmd->add_flag("--predict", decide_predict, "Compute the anticipation when none is given");

  auto* fixtures = app.add_subcommand("fixtures", "Emit or verify fixture data sets");
  std::string fixture_id, fixture_dir;
  bool verify = false;
  fixtures->add_option("id", fixture_id, "scenario1, scenario1_followup, scenario2 or all")->required();
  fixtures->add_option("out_dir", fixture_dir, "Output directory")->required();
  fixtures->add_flag("--verify", verify, "Check manifests instead of writing");

  auto* config = app.add_subcommand("config", "Show the effective configuration");
  bool show = false, hash_only = false;
  config->add_flag("--show", show, "Print all thresholds");
  config->add_flag("--hash", hash_only, "Print the configuration hash");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    RunConfig cfg = RunConfig::defaults();
    std::string cfg_file = config_path;
    if (cfg_file.empty()) {
      if (const char* env = std::getenv("SCENU_CONFIG"); env && *env) cfg_file = env;
    }
    try {
      if (!cfg_file.empty()) cfg = config_from_json(parse_json(read_file(cfg_file), cfg_file));
      for (const auto& o : overrides) apply_override(cfg, o);
    } catch (const std::exception& e) {
      err << "usage error: " << e.what() << "\n";
      return kExitUsage;
    }
    if (horizon) cfg.anticipation.horizon = *horizon;
    if (dt) cfg.anticipation.dt = *dt;
    const std::string hash = config_hash(cfg);

    if (*validate) {
      const std::string text = read_file(validate_path);
      ValidationReport report;
      if (looks_like_json(text)) {
        report = validate_document(text);
      } else {
        auto r = parse_annotation_text(text);
        if (!r.ok()) {
          if (format == "json") {
            json errs = json::array();
            for (const auto& d : r.errors) errs.push_back({{"line", d.line}, {"column", d.column}, {"message", d.message}});
            out << dump({{"valid", false}, {"parse_errors", errs}});
          } else {
            for (const auto& d : r.errors) out << validate_path << ":" << to_string(d) << "\n";
          }
          return kExitDomain;
        }
        report = validate_description(r.value->description);
        for (const auto& w : r.value->warnings) {
          report.warnings.push_back({"UNKNOWN_KEY", "line " + std::to_string(w.line), w.message});
        }
        if (r.value->anticipation) {
          auto ar = validate_anticipation(*r.value->anticipation, r.value->description);
          report.violations.insert(report.violations.end(), ar.violations.begin(), ar.violations.end());
        }
        if (!r.value->actions.empty()) {
          auto ar = validate_actions(r.value->actions, r.value->description,
                                     r.value->anticipation ? &*r.value->anticipation : nullptr);
          report.violations.insert(report.violations.end(), ar.violations.begin(), ar.violations.end());
        }
      }
      out << (format == "json" ? dump(to_json(report)) : report_text(report));
      return report.ok() ? kExitOk : kExitDomain;
    }

    if (*derive) {
      const auto parsed = parse_trajectory_log(read_file(log_path));
      if (!parsed.ok()) {
        for (const auto& d : parsed.errors) err << log_path << ":" << to_string(d) << "\n";
        return kExitDomain;
      }
      SceneContext scene;
      if (!context_path.empty()) {
        try {
          scene = scene_context_from_json(parse_json(read_file(context_path), context_path));
        } catch (const StructureError& e) {
          throw InputError(context_path + ": malformed scene context", {e.what()});
        }
      }
      const ScenarioDescription d = derive_description(*parsed.value, scene, cfg);
      write_output(derive_out, format == "dsl" ? serialize(d) : dump(to_json(d)), out);
      return kExitOk;
    }

    if (*predict) {
      Loaded l = load_description(predict_path);
      const auto report = validate_description(l.description);
      if (!report.ok()) {
        err << "error: " << predict_path << " does not validate\n" << report_text(report);
        return kExitDomain;
      }
      const ScenarioAnticipation a = anticipate(l.description, cfg);
      write_output(predict_out, format == "dsl" ? serialize(l.description, &a) : dump(to_json(a)), out);
      return kExitOk;
    }

    if (*score) {
      if (!batch_dir.empty()) {
        const auto job_list = batch_jobs(batch_dir);
        std::vector<std::optional<ScoreOutput>> results(job_list.size());
        std::vector<std::string> failures(job_list.size());
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
          for (std::size_t i = next++; i < job_list.size(); i = next++) {
            try {
              results[i] = run_score(job_list[i], "", cfg);
            } catch (const InputError& e) {
              failures[i] = e.what();
              for (const auto& l : e.lines) failures[i] += "\n  " + l;
            } catch (const std::exception& e) {
              failures[i] = e.what();
            }
          }
        };
        std::vector<std::thread> pool;
        const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(job_list.size())));
        for (unsigned k = 0; k < n; ++k) pool.emplace_back(worker);
        for (auto& t : pool) t.join();

        std::string csv = csv_header();
        json all = json::array();
        int status = kExitOk;
        for (std::size_t i = 0; i < job_list.size(); ++i) {
          if (!results[i]) {
            err << "error: " << job_list[i].candidate << ": " << failures[i] << "\n";
            status = kExitDomain;
            continue;
          }
          csv += csv_rows(results[i]->score, results[i]->scenario, results[i]->candidate, hash);
          all.push_back(score_json(*results[i], hash));
        }
        if (!score_out.empty()) {
          write_output((fs::path(score_out) / "report.json").string(), dump(all), out);
          write_output((fs::path(score_out) / "report.csv").string(), csv, out);
        }
        out << (format == "json" ? dump(all) : csv);
        return status;
      }
      if (gt_path.empty() || cand_path.empty()) {
        err << "usage error: score needs --gt and --candidate, or --dir\n";
        return kExitUsage;
      }
      const ScoreOutput o = run_score({"", gt_path, gt_ant_path, cand_path}, cand_ant_path, cfg);
      const json j = score_json(o, hash);
      if (!score_out.empty()) {
        write_output((fs::path(score_out) / "report.json").string(), dump(j), out);
        write_output((fs::path(score_out) / "report.csv").string(),
                     csv_header() + csv_rows(o.score, o.scenario, o.candidate, hash), out);
      }
      out << (format == "json" ? dump(j) : text_report(o.score));
      return kExitOk;
    }

    if (*decide_cmd) {
      Loaded l = load_description(decide_path);
      std::optional<ScenarioAnticipation> a = l.anticipation;
      if (!decide_ant.empty()) a = load_anticipation(decide_ant);
      if (!a && decide_predict) a = anticipate(l.description, cfg);
      TaskSpec task;
      task.kind = *parse_enum<TaskKind>(task_name);
      const auto actions = decide(l.description, a ? &*a : nullptr, task, cfg);
      out << (format == "json" ? dump(to_json(actions)) : actions_text(actions));
      return kExitOk;
    }

    if (*fixtures) {
      std::vector<std::string> ids = fixture_id == "all" ? fixture_ids() : std::vector<std::string>{fixture_id};
      if (fixture_id != "all") fixture_source(fixture_id);  // rejects unknown ids early
      const bool nested = fixture_id == "all";
      if (verify) {
        int status = kExitOk;
        for (const auto& id : ids) {
          const fs::path dir = nested ? fs::path(fixture_dir) / id : fs::path(fixture_dir);
          const auto problems = verify_manifest(dir);
          for (const auto& p : problems) out << id << ": " << p << "\n";
          if (problems.empty()) {
            out << id << ": ok\n";
          } else {
            status = kExitDomain;
          }
        }
        return status;
      }
      for (const auto& id : ids) {
        const fs::path dir = nested ? fs::path(fixture_dir) / id : fs::path(fixture_dir);
        for (const auto& p : emit_fixture(id, dir)) out << p.string() << "\n";
      }
      return kExitOk;
    }

    if (*config) {
      if (hash_only && !show) {
        out << hash << "\n";
      } else {
        json j = to_json(cfg);
        j["config_hash"] = hash;
        out << dump(j);
      }
      return kExitOk;
    }
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InputError& e) {
    print_input_error(e, err);
    return kExitDomain;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomain;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomain;
  }
  return kExitUsage;
}

}  // namespace scenu
