#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "lcn/serialize.hpp"
#include "lcn/verify.hpp"

using namespace lcn;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("model round trip is value-exact for every head kind") {
    Rng rng(2);
    for (HeadKind kind : {HeadKind::Table, HeadKind::FullyConnected, HeadKind::Linear}) {
        Model model;
        model.params = random_network(rng.next_u64(), 4, 3, 2, kind,
                                      kind == HeadKind::FullyConnected ? std::vector<int>{5}
                                                                       : std::vector<int>{});
        model.task = Task::Classification;
        const std::string text = to_json_string(model);
        const Model back = model_from_json_string(text);
        CHECK(back.params.layer_weights == model.params.layer_weights);
        CHECK(back.params.layer_biases == model.params.layer_biases);
        CHECK(back.params.variant == model.params.variant);
        // Byte-stable re-serialization.
        CHECK(to_json_string(back) == text);

        std::vector<double> x{0.31, -0.7, 1.9};
        CHECK(predict(back.params, x, 1.0) == predict(model.params, x, 1.0));
    }
}

TEST_CASE("awkward doubles survive the round trip") {
    Model model;
    model.params = random_network(11, 2, 2, 1, HeadKind::FullyConnected);
    model.params.layer_weights[0][0] = 0.1;  // not exactly representable
    model.params.layer_weights[0][1] = 1e-308;
    model.params.layer_weights[1][2] = -1.7976931348623157e308;
    model.params.layer_biases[0] = 4.9406564584124654e-324;  // denormal min
    const Model back = model_from_json_string(to_json_string(model));
    CHECK(back.params.layer_weights == model.params.layer_weights);
    CHECK(back.params.layer_biases == model.params.layer_biases);
}

TEST_CASE("masked table entries and the layout tag round-trip") {
    Model model;
    model.params = random_network(13, 3, 2, 1, HeadKind::Table);
    TableHead partial;
    partial.set("111", {4.0});
    partial.set("010", {-2.0});
    partial.set("x1x", {42.0});
    model.params.head = partial;
    const std::string text = to_json_string(model);
    CHECK(text.find("jacobian-rows-then-biases/v1") != std::string::npos);
    CHECK(text.find("ge-at-zero") != std::string::npos);
    const Model back = model_from_json_string(text);
    const auto& bt = std::get<TableHead>(back.params.head);
    REQUIRE(bt.find("111") != nullptr);
    CHECK((*bt.find("111"))[0] == 4.0);
    CHECK((*bt.find("010"))[0] == -2.0);   // exact beats the wildcard
    CHECK((*bt.find("011"))[0] == 42.0);   // wildcard catches the rest
    CHECK(bt.find("100") == nullptr);

    // The entry-count invariant: more than 2^M rows is rejected.
    Model overfull;
    overfull.params = random_network(14, 2, 2, 1, HeadKind::Table);
    std::get<TableHead>(overfull.params.head).set("x1", {1.0});
    CHECK_THROWS_AS(overfull.params.validate(), Error);
    // Wildcard rows are consulted only when no exact pattern matches, and
    // survive serialization in order.
    TableHead fresh;
    fresh.set("x1", {1.0});
    fresh.set("xx", {2.0});
    Model small;
    small.params = random_network(17, 2, 2, 1, HeadKind::Table);
    small.params.head = fresh;
    const Model sback = model_from_json_string(to_json_string(small));
    const auto& st = std::get<TableHead>(sback.params.head);
    CHECK((*st.find("01"))[0] == 1.0);
    CHECK((*st.find("00"))[0] == 2.0);
}

TEST_CASE("tree files round trip including lazy leaves") {
    const LcnParameters net = random_network(23, 4, 3, 2, HeadKind::FullyConnected, {4});
    TreeFile file;
    file.tree = lcn_to_tree(net);
    Standardizer s;
    s.mean = {0.5, -0.5, 0.0};
    s.stddev = {1.0, 2.0, 0.25};
    file.standardizer = s;

    const std::string text = to_json_string(file);
    const TreeFile back = tree_from_json_string(text);
    CHECK(to_json_string(back) == text);
    REQUIRE(back.standardizer.has_value());
    CHECK(*back.standardizer == s);
    Rng rng(29);
    for (int i = 0; i < 100; ++i) {
        std::vector<double> x(3);
        for (double& v : x) v = rng.uniform(-2.0, 2.0);
        CHECK(tree_predict(back.tree, x) == tree_predict(file.tree, x));
    }
}

TEST_CASE("format tags are enforced") {
    const Model model{random_network(31, 2, 2, 1, HeadKind::FullyConnected), {}, {}};
    const std::string text = to_json_string(model);
    CHECK_THROWS_AS(tree_from_json_string(text), DataError);
    CHECK_THROWS_AS(model_from_json_string("{\"format\":\"bogus\"}"), DataError);
    CHECK_THROWS_AS(model_from_json_string("not json at all"), DataError);
}

TEST_CASE("manifest save/load and format sniffing") {
    const std::string dir = temp_path("");
    const std::string model_path = temp_path("lcn_m0.json");
    const std::string manifest_path = temp_path("lcn_ens.json");

    Model component;
    component.params = random_network(37, 3, 2, 1, HeadKind::FullyConnected);
    save_model(component, model_path);

    ElcnManifest manifest;
    manifest.base_variant = Variant::Alcn;
    manifest.input_dim = 2;
    manifest.output_dim = 1;
    manifest.component_files = {"lcn_m0.json"};
    manifest.task = Task::Regression;
    save_elcn(manifest, manifest_path);

    CHECK(sniff_format(model_path) == FileFormat::Model);
    CHECK(sniff_format(manifest_path) == FileFormat::Elcn);

    const ElcnModel loaded = load_elcn_model(manifest_path);
    CHECK(loaded.components.size() == 1);
    CHECK(loaded.input_dim == 2);

    std::remove(model_path.c_str());
    std::remove(manifest_path.c_str());
}
