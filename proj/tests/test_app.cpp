#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>
#include <thread>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "icdh/config.hpp"
#include "icdh/crypto.hpp"
#include "icdh/server.hpp"
#include "icdh/service.hpp"

namespace icdh {
namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name)
{
    const auto p = fs::temp_directory_path() / ("icdh_app_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

AppConfig test_config(const fs::path& store)
{
    AppConfig cfg;
    cfg.store_dir = store.string();
    cfg.train.epochs = 2;
    return cfg;
}

ConsultationRequest fixture_request(const fixtures::FixtureRoom& room)
{
    ConsultationRequest req;
    req.image = encode_png(room.image);
    parse_attributes(fixtures::fixture_attributes(), req.attrs, req.prefs);
    req.detections = detections_to_json(room.detections);
    return req;
}

/// Service with an untrained model installed and a small synthetic dataset.
std::unique_ptr<Service> make_service(const fs::path& store, std::size_t rows = 60)
{
    auto svc = std::make_unique<Service>(test_config(store));
    svc->store().import_dataset_if_empty(synth_generate(rows, 3));
    svc->install_model(init_model(42));
    return svc;
}

TEST(Crypto, KnownVectors)
{
    const Bytes abc = {'a', 'b', 'c'};
    EXPECT_EQ(sha256_hex(abc), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(base64_encode(abc), "YWJj");
    EXPECT_EQ(base64_encode({'a', 'b'}), "YWI=");
    EXPECT_EQ(base64_decode("YWI="), (Bytes{'a', 'b'}));
    EXPECT_EQ(base64_decode("YQ=="), (Bytes{'a'}));
    std::mt19937 rng(1);
    for (int n = 0; n < 50; ++n) {
        Bytes b(static_cast<std::size_t>(n));
        for (auto& v : b) v = static_cast<std::uint8_t>(rng());
        ASSERT_EQ(base64_decode(base64_encode(b)), b);
    }
    EXPECT_THROW(base64_decode("abc"), ParseError);
}

TEST(Config, FileThenEnvironment)
{
    const auto dir = fresh_dir("config");
    const auto path = (dir / "cfg.json").string();
    std::ofstream(path) << R"({"port": 9000, "min_confidence": 0.3, "edge_threshold": 80, "epochs": 5})";
    auto c = config_from_json(read_json_file(path));
    EXPECT_EQ(c.port, 9000);
    EXPECT_DOUBLE_EQ(c.min_confidence, 0.3);
    EXPECT_DOUBLE_EQ(c.segmentation.edge_threshold, 80.0);
    EXPECT_EQ(c.train.epochs, 5);

    std::map<std::string, std::string> env = {{"ICDH_PORT", "9100"}, {"ICDH_STORE_DIR", "/tmp/x"}};
    c = apply_env_overrides(c, [&](const char* k) -> const char* {
        auto it = env.find(k);
        return it == env.end() ? nullptr : it->second.c_str();
    });
    EXPECT_EQ(c.port, 9100);
    EXPECT_EQ(c.store_dir, "/tmp/x");
    EXPECT_DOUBLE_EQ(c.min_confidence, 0.3);

    env = {{"ICDH_PORT", "90x"}};
    EXPECT_THROW(apply_env_overrides(c, [&](const char* k) -> const char* {
                     auto it = env.find(k);
                     return it == env.end() ? nullptr : it->second.c_str();
                 }),
                 ParseError);
    c.min_confidence = 2.0;
    EXPECT_THROW(validate(c), ValidationError);
}

TEST(Consult, FixtureRoomYieldsThreeRecommendationsAndRenders)
{
    const auto room = fixtures::fixture_room();
    auto svc = make_service(fresh_dir("consult"));
    const auto r = svc->consult(fixture_request(room));
    ASSERT_EQ(r.renders.size(), 3u);
    EXPECT_FALSE(r.warning.has_value());
    for (int i = 0; i < 3; ++i) EXPECT_EQ(r.renders[i].family_id, r.recommendation.choices[i].family_id);
    ASSERT_EQ(r.furniture.size(), 2u); // the 0.2-confidence chair is filtered out
    EXPECT_EQ(r.furniture[0].dominant, (Rgb8{190, 40, 40}));
    EXPECT_EQ(r.furniture[1].dominant, (Rgb8{40, 70, 170}));
    EXPECT_EQ(r.model_version, 1u);
    EXPECT_EQ(r.consultation_id.size(), 64u);

    const auto stored = svc->stored_result(r.consultation_id);
    ASSERT_TRUE(stored.has_value());
    EXPECT_EQ((*stored)["recommendations"].size(), 3u);
    for (std::size_t i = 1; i <= 3; ++i) {
        EXPECT_EQ(read_file_bytes(svc->store().render_path(r.consultation_id, i)), r.renders[i - 1].png);
    }
}

TEST(Consult, RendersKeepNonWallPixels)
{
    const auto room = fixtures::fixture_room();
    auto svc = make_service(fresh_dir("consult_pixels"));
    const auto r = svc->consult(fixture_request(room));
    for (const auto& render : r.renders) {
        const auto img = decode_image(render.png);
        EXPECT_EQ(img.at(40, 80), room.image.at(40, 80));   // couch
        EXPECT_EQ(img.at(80, 110), room.image.at(80, 110)); // floor
        EXPECT_NE(img.at(80, 10), room.image.at(80, 10));   // wall
    }
}

TEST(Consult, DeterministicAcrossRunsAndStores)
{
    const auto room = fixtures::fixture_room();
    auto a = make_service(fresh_dir("det_a"));
    auto b = make_service(fresh_dir("det_b"));
    const auto req = fixture_request(room);
    const auto r1 = a->consult(req);
    const auto r2 = a->consult(req);
    const auto r3 = b->consult(req);
    for (const auto* r : {&r2, &r3}) {
        EXPECT_EQ(result_document(*r, a->palette(), RenderEmbedding::base64).dump(),
                  result_document(r1, a->palette(), RenderEmbedding::base64).dump());
    }
    EXPECT_EQ(a->store().consultation_count(), 1u);
}

TEST(Consult, BlockedSeedBandDegradesGracefully)
{
    const auto room = fixtures::blocked_room();
    auto svc = make_service(fresh_dir("degraded"));
    const auto r = svc->consult(fixture_request(room));
    EXPECT_TRUE(r.renders.empty());
    EXPECT_TRUE(r.degraded());
    ASSERT_TRUE(r.warning.has_value());
    EXPECT_NE(r.warning->find("segmentation"), std::string::npos);
    EXPECT_NE(r.recommendation.choices[0].family_id, r.recommendation.choices[1].family_id);
    const auto doc = result_document(r, svc->palette());
    EXPECT_TRUE(doc["degraded"].get<bool>());
    EXPECT_EQ(doc["recommendations"].size(), 3u);
}

TEST(Consult, RequestErrors)
{
    const auto room = fixtures::fixture_room();
    auto svc = make_service(fresh_dir("errors"));
    auto req = fixture_request(room);
    req.detector_url = "http://127.0.0.1:1/detect";
    EXPECT_THROW(svc->consult(req), ValidationError);

    req = fixture_request(room);
    req.image = {'n', 'o', 'p', 'e'};
    EXPECT_THROW(svc->consult(req), ParseError);

    req = fixture_request(room);
    req.detections = nlohmann::json::parse(R"({"detections":[{"class":"toaster","confidence":1,"box":{"x":0,"y":0,"w":5,"h":5}}]})");
    EXPECT_THROW(svc->consult(req), ValidationError);

    Service empty(test_config(fresh_dir("errors_nomodel")));
    EXPECT_FALSE(empty.has_model());
    EXPECT_THROW(empty.consult(fixture_request(room)), Error);
}

TEST(Consult, DetectorProviderPath)
{
    const auto room = fixtures::fixture_room();
    httplib::Server stub;
    const std::string reply = detections_to_json(room.detections).dump();
    stub.Post("/detect", [&](const httplib::Request&, httplib::Response& res) { res.set_content(reply, "application/json"); });
    const int port = stub.bind_to_any_port("127.0.0.1");
    std::thread t([&] { stub.listen_after_bind(); });
    stub.wait_until_ready();

    auto svc = make_service(fresh_dir("provider"));
    auto req = fixture_request(room);
    const auto inline_result = svc->consult(req);
    req.detections.reset();
    req.detector_url = "http://127.0.0.1:" + std::to_string(port) + "/detect";
    const auto provided = svc->consult(req);
    EXPECT_EQ(provided.consultation_id, inline_result.consultation_id);
    stub.stop();
    t.join();

    EXPECT_THROW(svc->consult(req), ProviderUnavailable);
}

TEST(Feedback, AcceptAppendsOneLabelledRow)
{
    auto svc = make_service(fresh_dir("fb_accept"));
    const auto r = svc->consult(fixture_request(fixtures::fixture_room()));
    const auto before = svc->store().dataset_rows();
    const int family = r.recommendation.choices[1].family_id;
    const auto version = svc->model_version();
    const auto ack = svc->record_feedback(r.consultation_id, family);
    EXPECT_TRUE(ack.accepted);
    EXPECT_EQ(ack.dataset_rows, before + 1);
    const auto d = svc->store().dataset_snapshot();
    ASSERT_EQ(d.size(), before + 1);
    EXPECT_EQ(d.records.back().label, family);
    EXPECT_EQ(d.records.back().features, r.features);
    EXPECT_EQ(svc->model_version(), version);
}

TEST(Feedback, RejectStoresRecordOnly)
{
    auto svc = make_service(fresh_dir("fb_reject"));
    const auto r = svc->consult(fixture_request(fixtures::fixture_room()));
    const auto before = svc->store().dataset_rows();
    svc->record_feedback(r.consultation_id, std::nullopt);
    EXPECT_EQ(svc->store().dataset_rows(), before);
    const auto fb = svc->store().feedback();
    ASSERT_EQ(fb.size(), 1u);
    EXPECT_FALSE(fb[0].accepted_family.has_value());
    EXPECT_EQ(fb[0].timestamp.size(), 20u);
}

TEST(Feedback, UnknownIdAndForeignFamily)
{
    auto svc = make_service(fresh_dir("fb_errors"));
    EXPECT_THROW(svc->record_feedback(std::string(64, 'a'), 1), NotFound);
    const auto r = svc->consult(fixture_request(fixtures::fixture_room()));
    int outside = 0;
    while (std::any_of(r.recommendation.choices.begin(), r.recommendation.choices.end(),
                       [&](const RankedFamily& c) { return c.family_id == outside; })) {
        ++outside;
    }
    const auto before = svc->store().dataset_rows();
    EXPECT_THROW(svc->record_feedback(r.consultation_id, outside), ValidationError);
    EXPECT_EQ(svc->store().dataset_rows(), before);
    EXPECT_TRUE(svc->store().feedback().empty());
}

TEST(Retrain, IncrementsVersionAndLeavesDatasetAlone)
{
    auto svc = make_service(fresh_dir("retrain"));
    const auto r = svc->consult(fixture_request(fixtures::fixture_room()));
    svc->record_feedback(r.consultation_id, r.recommendation.choices[0].family_id);
    const auto rows = svc->store().dataset_rows();
    const auto v = svc->model_version();
    EXPECT_EQ(svc->retrain(5), v + 1);
    EXPECT_EQ(svc->model_version(), v + 1);
    EXPECT_EQ(svc->store().dataset_rows(), rows);
    EXPECT_TRUE(fs::exists(svc->store().model_path(v + 1)));
}

TEST(Retrain, EmptyDatasetIsDomainError)
{
    Service svc(test_config(fresh_dir("retrain_empty")));
    EXPECT_THROW(svc.retrain(1), DomainError);
}

TEST(Retrain, SameDatasetAndSeedGiveSameModelFile)
{
    auto a = make_service(fresh_dir("retrain_a"));
    auto b = make_service(fresh_dir("retrain_b"));
    const auto va = a->retrain(9);
    const auto vb = b->retrain(9);
    ASSERT_EQ(va, vb);
    const auto fa = read_file_bytes(a->store().model_path(va));
    const auto fb = read_file_bytes(b->store().model_path(vb));
    EXPECT_EQ(model_checksum(fa), model_checksum(fb));
    EXPECT_EQ(fa, fb);
}

TEST(Retrain, ConsultDuringRetrainUsesOldModel)
{
    auto svc = make_service(fresh_dir("retrain_swap"));
    const auto req = fixture_request(fixtures::fixture_room());
    const auto old_version = svc->model_version();
    std::uint64_t served = 0;
    svc->before_swap = [&](std::uint64_t) {
        served = std::async(std::launch::async, [&] { return svc->consult(req).model_version; }).get();
    };
    const auto next = svc->retrain(3);
    EXPECT_EQ(served, old_version);
    EXPECT_EQ(next, old_version + 1);
    svc->before_swap = nullptr;
    EXPECT_EQ(svc->consult(req).model_version, next);
}

TEST(Store, SurvivesRestart)
{
    const auto dir = fresh_dir("restart");
    std::string id;
    std::uint64_t version;
    {
        auto svc = make_service(dir);
        const auto r = svc->consult(fixture_request(fixtures::fixture_room()));
        id = r.consultation_id;
        svc->record_feedback(id, std::nullopt);
        version = svc->model_version();
    }
    Service again(test_config(dir));
    EXPECT_EQ(again.model_version(), version);
    EXPECT_TRUE(again.stored_result(id).has_value());
    EXPECT_EQ(again.store().feedback().size(), 1u);
    EXPECT_EQ(again.store().dataset_rows(), 60u);
}

class HttpService : public ::testing::Test {
protected:
    void SetUp() override
    {
        svc_ = make_service(fresh_dir(std::string("http_") + ::testing::UnitTest::GetInstance()->current_test_info()->name()));
        install_routes(server_, *svc_);
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
        client_->set_read_timeout(std::chrono::seconds(60));
    }
    void TearDown() override
    {
        server_.stop();
        thread_.join();
    }
    nlohmann::json consult_body() const
    {
        const auto room = fixtures::fixture_room();
        return {{"image_base64", base64_encode(encode_png(room.image))},
                {"attributes", fixtures::fixture_attributes()},
                {"detections", detections_to_json(room.detections)}};
    }

    std::unique_ptr<Service> svc_;
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
    std::unique_ptr<httplib::Client> client_;
};

TEST_F(HttpService, HealthAndModel)
{
    auto res = client_->Get("/health");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(nlohmann::json::parse(res->body)["status"], "ok");
    res = client_->Get("/model");
    ASSERT_TRUE(res);
    const auto doc = nlohmann::json::parse(res->body);
    EXPECT_EQ(doc["model_version"], 1);
    EXPECT_EQ(doc["palette"].size(), 10u);
    EXPECT_DOUBLE_EQ(doc["train_config"]["learning_rate"].get<double>(), 0.01);
}

TEST_F(HttpService, ConsultFeedbackRetrainLoop)
{
    auto res = client_->Post("/consult", consult_body().dump(), "application/json");
    ASSERT_TRUE(res);
    ASSERT_EQ(res->status, 200) << res->body;
    const auto doc = nlohmann::json::parse(res->body);
    ASSERT_EQ(doc["renders"].size(), 3u);
    const std::string id = doc["consultation_id"];
    for (const auto& r : doc["renders"]) {
        const auto png = base64_decode(r["png_base64"].get<std::string>());
        EXPECT_EQ(sha256_hex(png), r["png_sha256"]);
        EXPECT_NO_THROW(decode_image(png));
    }

    res = client_->Get("/consultations/" + id);
    ASSERT_TRUE(res);
    ASSERT_EQ(res->status, 200);
    const auto stored = nlohmann::json::parse(res->body);
    EXPECT_EQ(stored["recommendations"], doc["recommendations"]);
    res = client_->Get(stored["renders"][0]["url"].get<std::string>());
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(res->get_header_value("Content-Type"), "image/png");
    EXPECT_EQ(sha256_hex(Bytes(res->body.begin(), res->body.end())), stored["renders"][0]["png_sha256"]);

    const auto rows = svc_->store().dataset_rows();
    const int family = doc["recommendations"][0]["family_id"];
    res = client_->Post("/feedback", nlohmann::json{{"consultation_id", id}, {"accepted_family_id", family}}.dump(),
                        "application/json");
    ASSERT_TRUE(res);
    ASSERT_EQ(res->status, 200) << res->body;
    EXPECT_EQ(nlohmann::json::parse(res->body)["dataset_rows"], rows + 1);

    res = client_->Post("/retrain", R"({"seed": 4})", "application/json");
    ASSERT_TRUE(res);
    ASSERT_EQ(res->status, 200) << res->body;
    EXPECT_EQ(nlohmann::json::parse(res->body)["model_version"], 2);
}

TEST_F(HttpService, MultipartConsultMatchesJson)
{
    const auto room = fixtures::fixture_room();
    const auto png = encode_png(room.image);
    httplib::MultipartFormDataItems items = {
        {"image", std::string(png.begin(), png.end()), "room.png", "image/png"},
        {"attributes", fixtures::fixture_attributes().dump(), "", "application/json"},
        {"detections", detections_to_json(room.detections).dump(), "", "application/json"},
    };
    auto res = client_->Post("/consult", items);
    ASSERT_TRUE(res);
    ASSERT_EQ(res->status, 200) << res->body;
    auto json_res = client_->Post("/consult", consult_body().dump(), "application/json");
    ASSERT_TRUE(json_res);
    EXPECT_EQ(res->body, json_res->body);
}

TEST_F(HttpService, ErrorStatuses)
{
    auto res = client_->Get("/consultations/" + std::string(64, 'b'));
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 404);
    EXPECT_EQ(nlohmann::json::parse(res->body)["error"], "not_found");

    res = client_->Post("/feedback", nlohmann::json{{"consultation_id", std::string(64, 'b')}, {"rejected", true}}.dump(),
                        "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 404);

    res = client_->Post("/consult", "{not json", "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 400);

    auto body = consult_body();
    body["attributes"]["room_mood"] = "gloomy";
    res = client_->Post("/consult", body.dump(), "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 422);

    body = consult_body();
    body.erase("detections");
    res = client_->Post("/consult", body.dump(), "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 422);
}

// CLI tests drive the built binary; its path comes from the test environment.
class Cli : public ::testing::Test {
protected:
    void SetUp() override
    {
        const char* cli = std::getenv("ICDH_CLI");
        if (!cli) GTEST_SKIP() << "ICDH_CLI not set";
        cli_ = cli;
        dir_ = fresh_dir(std::string("cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    }
    int run(const std::string& args) const
    {
        const std::string cmd = "\"" + cli_ + "\" " + args + " > \"" + (dir_ / "last.log").string() + "\" 2>&1";
        const int rc = std::system(cmd.c_str());
        return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    }
    std::string p(const std::string& name) const { return "\"" + (dir_ / name).string() + "\""; }
    std::string log() const
    {
        std::ifstream in(dir_ / "last.log");
        return {std::istreambuf_iterator<char>(in), {}};
    }
    void write_fixture_inputs(const fixtures::FixtureRoom& room) const
    {
        write_png((dir_ / "room.png").string(), room.image);
        save_detections_file((dir_ / "det.json").string(), room.detections);
        std::ofstream(dir_ / "attrs.json") << fixtures::fixture_attributes().dump();
    }

    std::string cli_;
    fs::path dir_;
};

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

TEST_F(Cli, GenerateTrainConsultFeedbackRetrain)
{
    ASSERT_EQ(run("generate-data --n 1000 --seed 7 --out " + p("data.csv")), 0) << log();
    EXPECT_EQ(read_dataset((dir_ / "data.csv").string()).size(), 1000u);

    ASSERT_EQ(run("train --data " + p("data.csv") + " --epochs 3 --seed 1 --quiet --out " + p("model.bin")), 0) << log();
    const auto hist = read_json_file((dir_ / "model.bin.history.json").string());
    EXPECT_EQ(hist["history"].size(), 3u);
    EXPECT_DOUBLE_EQ(hist["learning_rate"].get<double>(), 0.01);
    EXPECT_NO_THROW(load_model((dir_ / "model.bin").string()));

    write_fixture_inputs(fixtures::fixture_room());
    const std::string consult = "consult --image " + p("room.png") + " --detections " + p("det.json") + " --attrs " +
                                p("attrs.json") + " --model " + p("model.bin") + " --seed 3";
    ASSERT_EQ(run(consult + " --out " + p("out1")), 0) << log();
    ASSERT_EQ(run(consult + " --out " + p("out2")), 0) << log();
    const auto result = read_json_file((dir_ / "out1" / "result.json").string());
    ASSERT_EQ(result["renders"].size(), 3u);
    for (const auto& r : result["renders"]) {
        const std::string file = r["file"];
        EXPECT_EQ(slurp(dir_ / "out1" / file), slurp(dir_ / "out2" / file));
        EXPECT_EQ(sha256_hex(read_file_bytes((dir_ / "out1" / file).string())), r["png_sha256"]);
    }
    EXPECT_EQ(slurp(dir_ / "out1" / "result.json"), slurp(dir_ / "out2" / "result.json"));

    const std::string id = result["consultation_id"];
    const std::string family = result["recommendations"][2]["family"];
    ASSERT_EQ(run("feedback --store " + p("out1/store") + " --id " + id + " --accept " + family), 0) << log();
    EXPECT_NE(log().find("dataset rows: 1"), std::string::npos) << log();
    ASSERT_EQ(run("retrain --store " + p("out1/store") + " --seed 2 --epochs 2"), 0) << log();
    EXPECT_NE(log().find("model_version 2"), std::string::npos) << log();
}

TEST_F(Cli, VisualizeWritesRendersAndMask)
{
    write_fixture_inputs(fixtures::fixture_room());
    ASSERT_EQ(run("visualize --image " + p("room.png") + " --detections " + p("det.json") +
                  " --family blue --family 4 --out " + p("viz")),
              0)
        << log();
    EXPECT_TRUE(fs::exists(dir_ / "viz" / "render_blue.png"));
    EXPECT_TRUE(fs::exists(dir_ / "viz" / "render_orange.png"));
    EXPECT_TRUE(fs::exists(dir_ / "viz" / "wall_mask.png"));
    EXPECT_EQ(read_json_file((dir_ / "viz" / "visualize.json").string())["renders"].size(), 2u);
}

TEST_F(Cli, ErrorsExitNonzero)
{
    EXPECT_NE(run(""), 0);
    EXPECT_NE(run("generate-data --n 0 --out " + p("x.csv")), 0);
    EXPECT_NE(run("train --data " + p("missing.csv") + " --out " + p("m.bin")), 0);
    EXPECT_NE(log().find("io_error"), std::string::npos);
    EXPECT_NE(run("feedback --store " + p("s") + " --id abc --reject"), 0);
    EXPECT_NE(log().find("not_found"), std::string::npos);
}

} // namespace
} // namespace icdh
