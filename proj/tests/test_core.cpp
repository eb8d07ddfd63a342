#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "timesearch/core.hpp"

using namespace timesearch;

namespace {

Question sample_mcq() {
  Question q;
  q.id = "q1";
  q.video_id = "vid1";
  q.text = "What color is the car?";
  q.kind = QuestionKind::mcq;
  q.options = {{"A", "red"}, {"B", "blue"}, {"C", "green"}};
  q.gold_answer = "B";
  q.gt_keyframes = std::vector<double>{12.5, 80.0};
  return q;
}

Trajectory sample_trajectory() {
  Trajectory t;
  t.question_id = "q1";
  t.preview.frames = {{"vid1", 0.0, 0}, {"vid1", 60.0, 30}};
  ToolCall call{10.0, 50.0, "car", 8};
  FrameSet found;
  found.frames = {{"vid1", 12.0, 6}, {"vid1", 14.0, 7}};
  t.steps.push_back(Step{"scan the beginning", call, found});
  t.steps.push_back(Step{"looks blue", std::string("B"), std::nullopt});
  t.final_answer = "B";
  t.terminated_by = TerminationReason::answer;
  return t;
}

template <typename T>
void check_roundtrip(const T& value) {
  json j;
  to_json(j, value);
  T back = json::parse(j.dump()).get<T>();
  CHECK(back == value);
}

}  // namespace

TEST_CASE("serialization round-trips", "[core]") {
  check_roundtrip(VideoSource{"vid1", 3600.0, 30.0});
  check_roundtrip(sample_mcq());

  Question open;
  open.id = "q2";
  open.video_id = "vid1";
  open.text = "Describe the scene.";
  open.kind = QuestionKind::open;
  open.gold_answer = "a man walks a dog";
  check_roundtrip(open);

  check_roundtrip(DatasetRecord{sample_mcq(), {"vid1", 3600.0, 30.0}});
  check_roundtrip(FrameRef{"vid1", 12.25, 3});
  check_roundtrip(ToolCall{1.5, 9.75, "dog", 8});
  check_roundtrip(sample_trajectory());
  check_roundtrip(RewardBreakdown{1.0, 1.0, 1.0, 3.0});
  check_roundtrip(RewardBreakdown{0.0, 1.0, 1.0, 2.0});
  check_roundtrip(GroupConfig{8, false, 0.005});

  FrameSet frames;
  frames.frames = {{"vid1", 1.0, 0}, {"vid1", 1.0, 1}, {"vid1", 2.5, 4}};
  check_roundtrip(frames);

  Message msg;
  msg.role = Role::environment;
  msg.text = "12.3s<frame>\n15.0s<frame>";
  msg.frames = {{"", 12.3, 5}, {"", 15.0, 6}};
  check_roundtrip(msg);
}

TEST_CASE("question validation", "[core]") {
  Question q = sample_mcq();

  SECTION("valid question passes") { CHECK_NOTHROW(validate(q)); }

  SECTION("lowercase option letter rejected") {
    q.options[0].letter = "a";
    CHECK_THROWS_AS(validate(q), std::invalid_argument);
  }

  SECTION("multi-character letter rejected") {
    q.options[0].letter = "AA";
    CHECK_THROWS_AS(validate(q), std::invalid_argument);
  }

  SECTION("duplicate letters rejected") {
    q.options[1].letter = "A";
    CHECK_THROWS_AS(validate(q), std::invalid_argument);
  }

  SECTION("gold answer must name an option") {
    q.gold_answer = "Z";
    CHECK_THROWS_AS(validate(q), std::invalid_argument);
  }

  SECTION("mcq without options rejected") {
    q.options.clear();
    CHECK_THROWS_AS(validate(q), std::invalid_argument);
  }
}

TEST_CASE("video source validation", "[core]") {
  CHECK_THROWS_AS(validate(VideoSource{"", 10.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(validate(VideoSource{"v", 0.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(validate(VideoSource{"v", 10.0, 0.0}), std::invalid_argument);
}

TEST_CASE("dataset record cross-checks keyframes against duration", "[core]") {
  DatasetRecord rec{sample_mcq(), {"vid1", 100.0, 30.0}};
  CHECK_NOTHROW(validate(rec));
  rec.question.gt_keyframes = std::vector<double>{150.0};
  CHECK_THROWS_AS(validate(rec), std::invalid_argument);
}

TEST_CASE("trajectory rejects steps after the answer", "[core]") {
  Trajectory t = sample_trajectory();
  ToolCall late{60.0, 70.0, "again", 8};
  t.steps.push_back(Step{"one more", late, FrameSet{}});
  CHECK_THROWS_AS(validate(t), std::invalid_argument);
}

TEST_CASE("trajectory enforces the search budget at rollout scale", "[core]") {
  Trajectory t;
  t.question_id = "q";
  for (int i = 0; i < 9; ++i)
    t.steps.push_back(Step{"s", ToolCall{0.0, 1.0, "x", 8}, FrameSet{}});
  CHECK_THROWS_AS(validate(t, 8), std::invalid_argument);
  CHECK_NOTHROW(validate(t, 9));
}

TEST_CASE("frame set invariants", "[core]") {
  FrameSet s;
  s.frames = {{"v", 5.0, 1}, {"v", 3.0, 2}};
  CHECK_THROWS_AS(validate(s), std::invalid_argument);
  s.frames = {{"v", 3.0, 2}, {"v", 5.0, 2}};
  CHECK_THROWS_AS(validate(s), std::invalid_argument);
}

TEST_CASE("reward breakdown invariants", "[core]") {
  CHECK_THROWS_AS(validate(RewardBreakdown{0.5, 1.0, 1.0, 2.5}), std::invalid_argument);
  CHECK_THROWS_AS(validate(RewardBreakdown{0.0, 1.0, 1.0, 3.0}), std::invalid_argument);
  // completeness without accuracy violates the gate
  CHECK_THROWS_AS(validate(RewardBreakdown{1.0, 1.0, 0.0, 2.0}), std::invalid_argument);
}

TEST_CASE("group config requires at least two rollouts", "[core]") {
  CHECK_THROWS_AS(validate(GroupConfig{1, false, 0.0}), std::invalid_argument);
}

TEST_CASE("dataset io skips the header line", "[core]") {
  std::string dir = std::filesystem::temp_directory_path().string();
  std::string path = dir + "/ts_core_dataset.jsonl";
  std::vector<DatasetRecord> records{{sample_mcq(), {"vid1", 100.0, 30.0}}};
  save_dataset(path, records, json{{"note", "test"}});
  auto back = load_dataset(path);
  REQUIRE(back.size() == 1);
  CHECK(back[0] == records[0]);
}
