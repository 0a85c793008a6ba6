// Copyright 2026 The j2k Authors.
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


#include "j2k/manifests.h"

#include <gtest/gtest.h>
#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <regex>

#include "j2k/error.h"
#include "test_support.h"

namespace j2k {
namespace {

using testing::Fixture;
using testing::ReadText;

ErrorCode CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kIo;
}

std::string Replace(std::string text, const std::string& from, const std::string& to) {
  for (auto pos = text.find(from); pos != std::string::npos; pos = text.find(from, pos + to.size())) {
    text.replace(pos, from.size(), to);
  }
  return text;
}

PodPlan Plan(const std::string& name) {
  PodPlan plan;
  plan.pod_name = name;
  plan.image_name = "j2k-" + name;
  plan.tag = "latest";
  return plan;
}

StepGraph Graph(const std::string& fixture) {
  return BuildStepGraph(ExtractMarkers(ParseNotebook(ReadText(Fixture(fixture)))));
}

TEST(RenderDeployment, MatchesReferenceTemplateByteForByte) {
  std::string expected = ReadText(Fixture("deployment_template.yaml"));
  expected = Replace(expected, "        {env_content}\n", "");
  expected = Replace(expected, "{pod_name}", "step1");
  expected = Replace(expected, "{image_name}", "j2k-step1");
  expected = Replace(expected, "{tag}", "latest");
  EXPECT_EQ(RenderDeployment(Plan("step1")), expected);
}

TEST(RenderDeployment, EnvContentFollowsBroker) {
  PodPlan plan = Plan("step-1");
  plan.role = PodRole::kProducer;
  plan.produce_topics = {"step-1-to-step-2"};
  plan.env = {{"J2K_STEP_ID", "step-1"}, {"LOG_LEVEL", "debug"}};
  std::string text = RenderDeployment(plan, "kafka:9092");
  YAML::Node env = YAML::Load(text)["spec"]["template"]["spec"]["containers"][0]["env"];
  ASSERT_EQ(env.size(), 3u);
  EXPECT_EQ(env[0]["name"].as<std::string>(), "KAFKA_BROKER");
  EXPECT_EQ(env[0]["value"].as<std::string>(), "kafka:9092");
  EXPECT_EQ(env[1]["name"].as<std::string>(), "J2K_STEP_ID");
  EXPECT_EQ(env[2]["value"].as<std::string>(), "debug");
  EXPECT_EQ(text, RenderDeployment(plan, "kafka:9092"));
}

TEST(RenderDeployment, ExampleSubstrings) {
  std::string text = RenderDeployment(Plan("step-1"));
  for (const char* s : {"replicas: 3", "maxSurge: 1", "claimName: step-1-efs-pvc",
                        "value: \"my-broker-address\""}) {
    EXPECT_NE(text.find(s), std::string::npos) << s;
  }
}

TEST(RenderDeployment, Errors) {
  EXPECT_EQ(CodeOf([] { RenderDeployment(Plan("Step_1!")); }), ErrorCode::kInvalidName);
  PodPlan bad = Plan("step-1");
  bad.role = PodRole::kProducer;
  EXPECT_EQ(CodeOf([&] { RenderDeployment(bad); }), ErrorCode::kInvalidConfig);
  PodPlan bad_topic = Plan("step-1");
  bad_topic.role = PodRole::kProducer;
  bad_topic.produce_topics = {"NotATopic"};
  EXPECT_EQ(CodeOf([&] { RenderDeployment(bad_topic); }), ErrorCode::kInvalidName);
}

TEST(DnsLabel, Rules) {
  EXPECT_TRUE(IsDnsLabel("step-1"));
  EXPECT_TRUE(IsDnsLabel(std::string(63, 'a')));
  EXPECT_FALSE(IsDnsLabel(std::string(64, 'a')));
  EXPECT_FALSE(IsDnsLabel("-step"));
  EXPECT_FALSE(IsDnsLabel("step-"));
  EXPECT_FALSE(IsDnsLabel("Step"));
  EXPECT_FALSE(IsDnsLabel(""));
}

TEST(RenderService, Template) {
  std::string text = RenderService(Plan("step-1"));
  YAML::Node svc = YAML::Load(text);
  EXPECT_EQ(svc["kind"].as<std::string>(), "Service");
  EXPECT_EQ(svc["metadata"]["name"].as<std::string>(), "step-1-svc");
  EXPECT_EQ(svc["spec"]["type"].as<std::string>(), "ClusterIP");
  EXPECT_EQ(svc["spec"]["selector"]["app"].as<std::string>(), "step-1");
  EXPECT_EQ(svc["spec"]["ports"][0]["port"].as<int>(), 80);
  EXPECT_EQ(svc["spec"]["ports"][0]["targetPort"].as<int>(), 8080);
  EXPECT_EQ(text, RenderService(Plan("step-1")));
  EXPECT_EQ(CodeOf([] { RenderService(Plan(std::string(64, 's'))); }), ErrorCode::kInvalidName);
}

TEST(RenderStorage, LocalMode) {
  StorageConfig local{StorageMode::kLocal, "worker-1", "5Gi", "/data/j2k", ""};
  auto docs = RenderStorage(Plan("step-1"), local);
  ASSERT_EQ(docs.size(), 2u);
  YAML::Node pv = YAML::Load(docs[0].yaml_text);
  YAML::Node pvc = YAML::Load(docs[1].yaml_text);
  EXPECT_EQ(docs[0].kind, "PersistentVolume");
  EXPECT_EQ(pv["spec"]["local"]["path"].as<std::string>(), "/data/j2k");
  EXPECT_EQ(pv["spec"]["capacity"]["storage"].as<std::string>(), "5Gi");
  EXPECT_EQ(pv["spec"]["accessModes"][0].as<std::string>(), "ReadWriteOnce");
  EXPECT_EQ(pv["spec"]["nodeAffinity"]["required"]["nodeSelectorTerms"][0]["matchExpressions"][0]
              ["values"][0].as<std::string>(),
            "worker-1");
  EXPECT_EQ(docs[1].name, "step-1-efs-pvc");
  EXPECT_EQ(pvc["spec"]["resources"]["requests"]["storage"].as<std::string>(), "5Gi");
  EXPECT_EQ(pvc["spec"]["accessModes"][0].as<std::string>(), "ReadWriteOnce");
  EXPECT_EQ(pvc["spec"]["storageClassName"].as<std::string>(),
            pv["spec"]["storageClassName"].as<std::string>());
}

TEST(RenderStorage, CloudMode) {
  StorageConfig cloud{StorageMode::kCloud, "", "5Gi", "", "fs-123"};
  auto docs = RenderStorage(Plan("step-1"), cloud);
  YAML::Node pv = YAML::Load(docs[0].yaml_text);
  EXPECT_EQ(pv["spec"]["accessModes"].size(), 1u);
  EXPECT_EQ(pv["spec"]["accessModes"][0].as<std::string>(), "ReadWriteMany");
  EXPECT_EQ(pv["spec"]["csi"]["driver"].as<std::string>(), "efs.csi.aws.com");
  EXPECT_EQ(pv["spec"]["csi"]["volumeHandle"].as<std::string>(), "fs-123");
  EXPECT_EQ(YAML::Load(docs[1].yaml_text)["spec"]["accessModes"][0].as<std::string>(),
            "ReadWriteMany");
}

TEST(RenderStorage, MissingFields) {
  StorageConfig no_node{StorageMode::kLocal, "", "5Gi", "/data/j2k", ""};
  StorageConfig no_path{StorageMode::kLocal, "worker-1", "5Gi", "", ""};
  StorageConfig no_handle{StorageMode::kCloud, "", "5Gi", "", ""};
  for (const auto& cfg : {no_node, no_path, no_handle}) {
    EXPECT_EQ(CodeOf([&] { RenderStorage(Plan("step-1"), cfg); }), ErrorCode::kMissingField);
  }
}

TEST(RenderHpa, BoundsAndRoundTrip) {
  YAML::Node hpa = YAML::Load(RenderHpa(Plan("step-1"), 3, 10, 50));
  EXPECT_EQ(hpa["apiVersion"].as<std::string>(), "autoscaling/v2");
  EXPECT_EQ(hpa["spec"]["scaleTargetRef"]["name"].as<std::string>(), "step-1-deployment");
  EXPECT_EQ(hpa["spec"]["scaleTargetRef"]["kind"].as<std::string>(), "Deployment");
  EXPECT_EQ(hpa["spec"]["minReplicas"].as<int>(), 3);
  EXPECT_EQ(hpa["spec"]["maxReplicas"].as<int>(), 10);
  EXPECT_EQ(hpa["spec"]["metrics"][0]["resource"]["name"].as<std::string>(), "cpu");
  EXPECT_EQ(hpa["spec"]["metrics"][0]["resource"]["target"]["averageUtilization"].as<int>(), 50);
  EXPECT_NO_THROW(RenderHpa(Plan("step-1"), 3, 3, 50));
  EXPECT_EQ(CodeOf([] { RenderHpa(Plan("step-1"), 0, 10, 50); }), ErrorCode::kInvalidBounds);
  EXPECT_EQ(CodeOf([] { RenderHpa(Plan("step-1"), 5, 4, 50); }), ErrorCode::kInvalidBounds);
  EXPECT_EQ(CodeOf([] { RenderHpa(Plan("step-1"), 1, 4, 101); }), ErrorCode::kInvalidBounds);
}

TEST(PlanPods, Linear3Roles) {
  auto plans = PlanPods(Graph("linear3.ipynb"), EnvironmentSpec{});
  ASSERT_EQ(plans.size(), 3u);
  EXPECT_EQ(plans[0].role, PodRole::kProducer);
  EXPECT_EQ(plans[1].role, PodRole::kBoth);
  EXPECT_EQ(plans[2].role, PodRole::kConsumer);
  EXPECT_EQ(plans[1].image_name, "j2k-step-2");
  EXPECT_EQ(plans[1].tag, "latest");
  EXPECT_EQ(plans[1].env[0], (EnvVar{"J2K_STEP_ID", "step-2"}));
  EXPECT_EQ(plans[1].env[1], (EnvVar{"J2K_PRODUCE_TOPICS", "step-2-to-step-3"}));
  EXPECT_EQ(plans[1].env[2], (EnvVar{"J2K_CONSUME_TOPICS", "step-1-to-step-2"}));
}

TEST(PlanPods, SingleStepIsIsolated) {
  Notebook nb;
  nb.cells.push_back(Cell{0, "x = 1", {}});
  auto plans = PlanPods(BuildStepGraph(nb), EnvironmentSpec{});
  ASSERT_EQ(plans.size(), 1u);
  EXPECT_EQ(plans[0].role, PodRole::kIsolated);
  EXPECT_EQ(plans[0].env[1], (EnvVar{"J2K_PRODUCE_TOPICS", ""}));
  EXPECT_EQ(plans[0].env[2], (EnvVar{"J2K_CONSUME_TOPICS", ""}));
}

TEST(PlanPods, DiamondDegreesAndTopicConsistency) {
  StepGraph g = Graph("diamond.ipynb");
  auto plans = PlanPods(g, EnvironmentSpec{});
  EXPECT_EQ(plans[0].produce_topics.size(), 2u);
  EXPECT_EQ(plans[3].consume_topics.size(), 2u);
  const std::regex topic_re("^[a-z0-9-]+-to-[a-z0-9-]+$");
  for (const Edge& e : g.edges) {
    std::string topic = e.from + "-to-" + e.to;
    ASSERT_TRUE(std::regex_match(topic, topic_re));
    int producers = 0, consumers = 0;
    for (const PodPlan& p : plans) {
      producers += static_cast<int>(std::count(p.produce_topics.begin(), p.produce_topics.end(), topic));
      consumers += static_cast<int>(std::count(p.consume_topics.begin(), p.consume_topics.end(), topic));
    }
    EXPECT_EQ(producers, 1) << topic;
    EXPECT_EQ(consumers, 1) << topic;
  }
}

TEST(PlanPods, EnvSpecOverrides) {
  EnvironmentSpec env;
  env.image_prefix = "registry.local/nb-";
  env.tag = "v7";
  auto plans = PlanPods(Graph("linear3.ipynb"), env);
  EXPECT_EQ(plans[0].image_name, "registry.local/nb-step-1");
  EXPECT_EQ(plans[0].tag, "v7");
}

TEST(Bundle, CountsAndOrder) {
  StepGraph g = Graph("linear3.ipynb");
  EnvironmentSpec env;
  ManifestBundle b = BuildBundle(PlanPods(g, env), StorageFromEnvironment(env),
                                 BundleOptionsFromEnvironment(env, true));
  ASSERT_EQ(b.documents.size(), 15u);
  std::vector<std::string> kinds;
  for (const auto& d : b.documents) kinds.push_back(d.kind);
  std::vector<std::string> expected;
  for (const char* k : {"PersistentVolume", "PersistentVolumeClaim", "Service", "Deployment",
                        "HorizontalPodAutoscaler"}) {
    for (int i = 0; i < 3; ++i) expected.push_back(k);
  }
  EXPECT_EQ(kinds, expected);
  EXPECT_EQ(b.documents[9].name, "step-1-deployment");
  EXPECT_EQ(b.documents[11].name, "step-3-deployment");

  EXPECT_TRUE(BuildBundle({}, StorageFromEnvironment(env), BundleOptions{}).documents.empty());
}

TEST(Bundle, FiveStepsWithoutHpa) {
  Notebook nb;
  for (std::size_t i = 0; i < 5; ++i) nb.cells.push_back(Cell{i, "v" + std::to_string(i) + " = 1", {}});
  EnvironmentSpec env;
  ManifestBundle b = BuildBundle(PlanPods(BuildStepGraph(nb), env), StorageFromEnvironment(env),
                                 BundleOptionsFromEnvironment(env, false));
  EXPECT_EQ(b.documents.size(), 20u);
}

TEST(Bundle, JoinSplitAndWrite) {
  StepGraph g = Graph("pipeline.ipynb");
  EnvironmentSpec env;
  ManifestBundle b = BuildBundle(PlanPods(g, env), StorageFromEnvironment(env),
                                 BundleOptionsFromEnvironment(env, true));
  std::string all = JoinBundle(b);
  EXPECT_EQ(SplitBundle(all), b);
  EXPECT_EQ(JoinBundle(BuildBundle(PlanPods(g, env), StorageFromEnvironment(env),
                                   BundleOptionsFromEnvironment(env, true))),
            all);

  auto dir = std::filesystem::temp_directory_path() / "j2k_manifests_test";
  std::filesystem::remove_all(dir);
  WriteBundle(b, dir);
  EXPECT_EQ(ReadText(dir / "all.yaml"), all);
  EXPECT_EQ(ReadText(dir / "00-persistentvolume-load-pv.yaml"), b.documents[0].yaml_text);
  EXPECT_TRUE(std::filesystem::exists(dir / "14-horizontalpodautoscaler-summarize-hpa.yaml"));
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace j2k
