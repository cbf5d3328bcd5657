#include <filesystem>
#include <sstream>
#include <string>

#include "doctest.h"

#include "common.hpp"
#include "runner.hpp"

#include "ear/ear.h"

namespace {

namespace fs = std::filesystem;

// One shared trained run for every C API test; building it once keeps the
// suite fast.
struct SharedRun {
  fs::path dir;
  SharedRun() : dir(fs::temp_directory_path() / "ear_capi_fixture") {
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::string tsv = "text\tlabel\n";
    const char* hate[] = {"you are awful people", "i despise this crowd"};
    const char* nice[] = {"the garden looks lovely", "we enjoyed the concert"};
    for (int i = 0; i < 10; ++i) {
      tsv += std::string(hate[i % 2]) + " v" + std::to_string(i) + "\t1\n";
      tsv += std::string(nice[i % 2]) + " v" + std::to_string(i) + "\t0\n";
    }
    ear::write_file_atomic((dir / "train.tsv").string(), tsv);

    ear::TrainCommand cmd;
    cmd.train_path = (dir / "train.tsv").string();
    cmd.out_dir = (dir / "run").string();
    cmd.overrides = {{"max_epochs", "2"}, {"batch_size", "8"}, {"learning_rate", "0.002"},
                     {"d_m", "8"},        {"d_k", "4"},        {"d_v", "4"},
                     {"d_ff", "12"},      {"max_len", "12"}};
    cmd.quiet = true;
    std::ostringstream sink;
    ear::run_train(cmd, sink);
  }
  ~SharedRun() { fs::remove_all(dir); }

  std::string checkpoint() const { return (dir / "run" / "seed-0" / "best.ckpt").string(); }
  std::string vocab() const { return (dir / "run" / "vocab.txt").string(); }
};

const SharedRun& shared_run() {
  static SharedRun run;
  return run;
}

}  // namespace

TEST_CASE("version and error strings are always readable") {
  REQUIRE(ear_version() != nullptr);
  CHECK(std::string(ear_version()) == ear::kToolVersion);
  REQUIRE(ear_last_error() != nullptr);
  ear_string_free(nullptr);  // must be a no-op
}

TEST_CASE("null arguments are input errors with messages") {
  CHECK(ear_cmd_train(nullptr) == EAR_ERR_INPUT);
  CHECK(std::string(ear_last_error()).find("null") != std::string::npos);
  CHECK(ear_cmd_eval(nullptr) == EAR_ERR_INPUT);
  CHECK(ear_cmd_extract_terms(nullptr) == EAR_ERR_INPUT);
  CHECK(ear_cmd_gen_synthetic(nullptr) == EAR_ERR_INPUT);
  CHECK(ear_cmd_gradcheck(nullptr, nullptr) == EAR_ERR_INPUT);
  CHECK(ear_model_open(nullptr, nullptr, nullptr) == EAR_ERR_INPUT);
  CHECK(ear_model_score(nullptr, "x", nullptr) == EAR_ERR_INPUT);
  CHECK(ear_model_profile_json(nullptr, "x", nullptr) == EAR_ERR_INPUT);
}

TEST_CASE("bad paths come back as input errors naming the file") {
  ear_train_options o{};
  o.train_path = "/nonexistent/data.tsv";
  o.out_dir = "/tmp/ear_capi_never";
  CHECK(ear_cmd_train(&o) == EAR_ERR_INPUT);
  CHECK(std::string(ear_last_error()).find("/nonexistent/data.tsv") != std::string::npos);

  ear_model* model = nullptr;
  CHECK(ear_model_open("/nonexistent/best.ckpt", "/nonexistent/vocab.txt", &model) ==
        EAR_ERR_INPUT);
  CHECK(model == nullptr);
}

TEST_CASE("a trained model scores and profiles text through the handle") {
  const SharedRun& run = shared_run();
  ear_model* model = nullptr;
  REQUIRE(ear_model_open(run.checkpoint().c_str(), run.vocab().c_str(), &model) == EAR_OK);
  REQUIRE(model != nullptr);

  double p_hate = -1.0;
  REQUIRE(ear_model_score(model, "you are awful people", &p_hate) == EAR_OK);
  CHECK(p_hate >= 0.0);
  CHECK(p_hate <= 1.0);
  double p_nice = -1.0;
  REQUIRE(ear_model_score(model, "the garden looks lovely", &p_nice) == EAR_OK);
  CHECK(p_nice >= 0.0);
  CHECK(p_nice <= 1.0);

  char* json = nullptr;
  REQUIRE(ear_model_profile_json(model, "the garden looks lovely", &json) == EAR_OK);
  REQUIRE(json != nullptr);
  const std::string payload(json);
  ear_string_free(json);
  CHECK(payload.find("\"tokens\"") != std::string::npos);
  CHECK(payload.find("[CLS]") != std::string::npos);
  CHECK(payload.find("\"layer_entropy\"") != std::string::npos);

  ear_model_close(model);
  ear_model_close(nullptr);  // must be a no-op
}

TEST_CASE("opening a model with the wrong vocabulary fails cleanly") {
  const SharedRun& run = shared_run();
  const std::string other = (run.dir / "other_vocab.txt").string();
  const ear::Vocabulary v = ear::Vocabulary::build({"entirely different corpus text"}, 1);
  v.save(other);

  ear_model* model = nullptr;
  CHECK(ear_model_open(run.checkpoint().c_str(), other.c_str(), &model) == EAR_ERR_INPUT);
  CHECK(model == nullptr);
  CHECK(std::string(ear_last_error()).find("does not match") != std::string::npos);
}

TEST_CASE("gradcheck through the C interface reports its error bound") {
  ear_gradcheck_options o{};
  o.seed = 0;
  double max_err = -1.0;
  CHECK(ear_cmd_gradcheck(&o, &max_err) == EAR_OK);
  CHECK(max_err >= 0.0);
  CHECK(max_err < 1e-4);
  CHECK(std::string(ear_last_error()).empty());  // success clears the slot
}

TEST_CASE("synthetic generation through the C interface") {
  const SharedRun& run = shared_run();
  const std::string templates = (run.dir / "capi_templates.tsv").string();
  const std::string terms = (run.dir / "capi_terms.txt").string();
  ear::write_file_atomic(templates, "you people are {}\t1\nmy neighbour is {}\t0\n");
  ear::write_file_atomic(terms, "awful\nlovely\n");

  ear_gen_synthetic_options o{};
  const std::string out_data = (run.dir / "capi_synth.tsv").string();
  const std::string out_members = (run.dir / "capi_members.tsv").string();
  o.templates_path = templates.c_str();
  o.terms_path = terms.c_str();
  o.out_data_path = out_data.c_str();
  o.out_memberships_path = out_members.c_str();
  o.quiet = 1;
  CHECK(ear_cmd_gen_synthetic(&o) == EAR_OK);
  CHECK(ear::file_exists(out_data));
  CHECK(ear::file_exists(out_members));

  ear_eval_options e{};
  const std::string ckpt = run.checkpoint();
  const std::string vocab = run.vocab();
  const std::string out_dir = (run.dir / "capi_eval").string();
  e.checkpoint_path = ckpt.c_str();
  e.vocab_path = vocab.c_str();
  e.data_path = out_data.c_str();
  e.terms_path = terms.c_str();
  e.out_dir = out_dir.c_str();
  e.memberships_path = out_members.c_str();
  e.quiet = 1;
  CHECK(ear_cmd_eval(&e) == EAR_OK);
  CHECK(ear::file_exists(out_dir + "/report.json"));
  CHECK(ear::file_exists(out_dir + "/report.csv"));
  CHECK(ear::file_exists(out_dir + "/scores.tsv"));
}
