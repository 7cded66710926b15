#include <gtest/gtest.h>

#include <sstream>
#include <vector>

#include "loha/dataset.hpp"
#include "loha/problem.hpp"

using namespace loha;

namespace {

Sample make_sample(int x, int y, double target, bool complete, double alpha = 1.0, int K = 3) {
  Sample s;
  s.map_id = "m0";
  s.state = {x, y};
  s.K = K;
  s.target = target;
  s.alpha = alpha;
  s.complete = complete;
  s.source = complete ? SampleSource::BacktrackComplete : SampleSource::BacktrackIncomplete;
  s.problem_id = 7;
  s.h_g_s = 12.5;
  s.goal = {20, 20};
  s.mode = "astar";
  return s;
}

MapSet one_map() {
  MapSet maps;
  maps.emplace("m0", generate_random(32, 32, 0.2, 5));
  return maps;
}

}  // namespace

TEST(SampleFile, RoundTrip) {
  std::vector<Sample> in{make_sample(1, 2, 0.0, true), make_sample(3, 4, 1.25, false, 0.5),
                         make_sample(5, 6, 2.0 / 3.0, true)};
  in[2].source = SampleSource::Oracle;
  in[2].mode = "oracle";
  std::stringstream ss;
  write_samples(in, ss);
  const auto out = read_samples(ss);
  ASSERT_EQ(out.size(), in.size());
  for (std::size_t i = 0; i < in.size(); ++i) EXPECT_EQ(out[i], in[i]);
}

TEST(SampleFile, FieldOrderAndNames) {
  std::stringstream ss;
  write_samples({make_sample(1, 2, 0.5, false, 0.25)}, ss);
  EXPECT_EQ(ss.str(),
            "{\"schema_version\":1,\"map_id\":\"m0\",\"state\":[1,2],\"K\":3,\"target\":0.5,\"alpha\":0.25,"
            "\"complete\":false,\"source\":\"backtrack-incomplete\",\"problem_id\":7,\"h_g_s\":12.5,"
            "\"goal\":[20,20],\"mode\":\"astar\"}\n");
}

TEST(SampleFile, ErrorsCarryLineNumbers) {
  std::stringstream good;
  write_samples({make_sample(1, 2, 0.0, true)}, good);
  const std::string line = good.str();
  {
    std::istringstream in(line + line + "{not json\n");
    try {
      read_samples(in);
      FAIL();
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), 3u);
    }
  }
  {
    std::string bad = line;
    bad.replace(bad.find("\"alpha\":1.0"), 11, "\"alpha\":0.0");
    std::istringstream in(line + bad);
    try {
      read_samples(in);
      FAIL();
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), 2u);
      EXPECT_NE(std::string(e.what()).find("alpha"), std::string::npos);
    }
  }
  {
    std::istringstream in("{\"schema_version\":1}\n");
    EXPECT_THROW(read_samples(in), ParseError);
  }
  {
    std::string v2 = line;
    v2.replace(v2.find("\"schema_version\":1"), 18, "\"schema_version\":2");
    std::istringstream in(v2);
    EXPECT_THROW(read_samples(in), ParseError);
  }
  EXPECT_THROW(read_samples(std::string("/nonexistent/samples.jsonl")), IoError);
}

TEST(SampleFile, HashTracksContent) {
  const std::vector<Sample> a{make_sample(1, 2, 0.0, true)};
  auto b = a;
  EXPECT_EQ(samples_hash(a), samples_hash(b));
  b[0].target = 0.5;
  EXPECT_NE(samples_hash(a), samples_hash(b));
}

TEST(BuildDataset, ColumnsMatchFeaturizer) {
  const auto maps = one_map();
  std::vector<Sample> s{make_sample(4, 4, 1.0, true), make_sample(10, 12, 2.0, false, 0.5)};
  s[0].goal = {30, 30};
  const auto data = build_dataset<Grid2D>(s, maps);
  ASSERT_EQ(data.size(), 2);
  EXPECT_EQ(data.features.rows(), feature_size<Grid2D>(3));
  const Grid2D d(maps.at("m0"));
  EXPECT_EQ(Eigen::VectorXd(data.features.col(0)), featurize(d, Cell{4, 4}, Cell{30, 30}, 3));
  EXPECT_EQ(Eigen::VectorXd(data.features.col(1)), featurize(d, Cell{10, 12}, Cell{20, 20}, 3));
  EXPECT_EQ(data.targets[1], 2.0);
  EXPECT_EQ(data.alphas[1], 0.5);
}

TEST(BuildDataset, RejectsEmptyMixedKAndUnknownMap) {
  const auto maps = one_map();
  try {
    build_dataset<Grid2D>({}, maps);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("empty dataset"), std::string::npos);
  }
  std::vector<Sample> mixed{make_sample(1, 1, 0, true, 1.0, 3), make_sample(2, 2, 0, true, 1.0, 4)};
  EXPECT_THROW(build_dataset<Grid2D>(mixed, maps), ValidationError);
  auto unknown = make_sample(1, 1, 0, true);
  unknown.map_id = "nope";
  EXPECT_THROW(build_dataset<Grid2D>({unknown}, maps), ValidationError);
}

TEST(Subsample, DeterministicOrderedAndBounded) {
  std::vector<Sample> s;
  for (int i = 0; i < 50; ++i) s.push_back(make_sample(i, 0, i, true));
  const auto a = subsample(s, 10, 3), b = subsample(s, 10, 3);
  ASSERT_EQ(a.size(), 10u);
  EXPECT_EQ(a, b);
  for (std::size_t i = 1; i < a.size(); ++i) EXPECT_LT(a[i - 1].state[0], a[i].state[0]);
  EXPECT_EQ(subsample(s, 0, 3), s);
  EXPECT_EQ(subsample(s, 80, 3), s);
}

TEST(PrepareTrainingData, BalancesIncompleteAgainstComplete) {
  const auto maps = one_map();
  std::vector<Sample> s;
  for (int i = 0; i < 4; ++i) s.push_back(make_sample(i + 1, 1, 0.0, true));
  for (int i = 0; i < 40; ++i) s.push_back(make_sample(i % 30 + 1, 5, 1.0, false, 0.5));
  DataConfig cfg;
  EXPECT_EQ(prepare_training_data<Grid2D>(s, maps, cfg).size(), 44);
  cfg.incomplete_ratio = 2.0;
  const auto d = prepare_training_data<Grid2D>(s, maps, cfg);
  ASSERT_EQ(d.size(), 4 + 8);
  EXPECT_EQ((d.alphas.array() == 1.0).count(), 4);
  cfg.incomplete_ratio = 0.0;
  EXPECT_EQ(prepare_training_data<Grid2D>(s, maps, cfg).size(), 4);
  cfg.max_samples = 3;
  EXPECT_EQ(prepare_training_data<Grid2D>(s, maps, cfg).size(), 3);
  cfg.augment = true;
  EXPECT_EQ(prepare_training_data<Grid2D>(s, maps, cfg).size(), 24);
  // No complete samples at all: everything is kept.
  std::vector<Sample> only_incomplete(s.begin() + 4, s.end());
  DataConfig zero;
  zero.incomplete_ratio = 0.0;
  EXPECT_EQ(prepare_training_data<Grid2D>(only_incomplete, maps, zero).size(), 40);
}

TEST(Augment, IdentityBlockFirst) {
  const auto maps = one_map();
  const auto base = build_dataset<Grid2D>({make_sample(7, 9, 1.5, true), make_sample(3, 3, 0.5, false, 0.5)}, maps);
  const auto aug = augment_symmetries<Grid2D>(base, 3);
  ASSERT_EQ(aug.size(), 16);
  EXPECT_EQ(Eigen::MatrixXd(aug.features.leftCols(2)), base.features);
  for (int t = 0; t < 8; ++t) {
    EXPECT_EQ(aug.targets[2 * t], 1.5);
    EXPECT_EQ(aug.alphas[2 * t + 1], 0.5);
    // Occupancy count is preserved by any symmetry.
    EXPECT_EQ(aug.features.col(2 * t).head(49).sum(), base.features.col(0).head(49).sum());
  }
}

TEST(ProblemFile, RoundTripAndValidation) {
  ProblemInstance<CarState> p;
  p.map_path = "maps/map_003.map";
  p.start = CarState{10, 12, 3, 0};
  p.goal = CarState{80, 90, 0, 0};
  p.K = 4;
  p.w = 4.0;
  p.seed = 99;
  const auto j = problem_to_json<Car4D>(p);
  EXPECT_EQ(j.dump(), "{\"map\":\"maps/map_003.map\",\"start\":[10,12,3,0],\"goal\":[80,90,0,0],\"K\":4,\"w\":4.0,\"seed\":99}");
  const auto back = problem_from_json<Car4D>(nlohmann::json::parse(j.dump()), 5);
  EXPECT_EQ(back.start, p.start);
  EXPECT_EQ(back.goal, p.goal);
  EXPECT_EQ(back.map_id, "map_003");
  EXPECT_EQ(back.id, 5);
  auto bad = nlohmann::json::parse(j.dump());
  bad["w"] = 0.5;
  EXPECT_THROW(problem_from_json<Car4D>(bad), ValidationError);
  bad = nlohmann::json::parse(j.dump());
  bad.erase("goal");
  EXPECT_THROW(problem_from_json<Car4D>(bad), ValidationError);
}

TEST(ProblemSampling, RespectsDistanceBandAndSolvability) {
  const auto g = generate_random(64, 64, 0.2, 3);
  Grid2D d(g);
  ProblemSampling opts;
  opts.min_distance = 10;
  opts.max_distance = 20;
  const auto ps = sample_problems(d, "x/m.map", 10, 4, opts, 3, 2.0);
  ASSERT_EQ(ps.size(), 10u);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const double dist = std::hypot(ps[i].start.x - ps[i].goal.x, ps[i].start.y - ps[i].goal.y);
    EXPECT_GE(dist, 10.0);
    EXPECT_LE(dist, 20.0);
    EXPECT_TRUE(astar(d, ps[i].start, ps[i].goal).solved());
    EXPECT_EQ(ps[i].id, static_cast<std::int64_t>(i));
    EXPECT_EQ(ps[i].map_id, "m");
  }
  const auto again = sample_problems(d, "x/m.map", 10, 4, opts, 3, 2.0);
  for (std::size_t i = 0; i < ps.size(); ++i) EXPECT_EQ(again[i].start, ps[i].start);
}
