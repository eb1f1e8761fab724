#include "support.hpp"

#include <gtest/gtest.h>

using namespace lsr;
using namespace lsr::test;

namespace {

struct Fixture {
    CascadeModel cascade;
    LandmarkClassifierSet classifiers;
    GeometryModel geometry;
};

const Fixture& fixture()
{
    static const Fixture f = [] {
        const auto fs = faces(synth_config(12, 2), 0, 12);
        const auto samples = samples_of(fs);
        Fixture out;
        out.cascade = train_cascade(samples, tiny_config(), FeatureConfig{});
        PerturbationConfig pc{2.0, 2.0, 40, 3};
        out.classifiers = train_classifier_set(samples, out.cascade.canonical(), pc, FeatureConfig{});
        std::vector<Shape> shapes;
        for (const auto& s : samples) {
            shapes.push_back(s.label);
        }
        out.geometry = discover_combinations(shapes, ibug68::stable_subset(), {0.2, 40, 10});
        return out;
    }();
    return f;
}

void expect_same_cascade(const CascadeModel& a, const CascadeModel& b)
{
    EXPECT_EQ(a.mean_shape, b.mean_shape);
    EXPECT_EQ(a.box_shape, b.box_shape);
    EXPECT_EQ(a.features, b.features);
    ASSERT_EQ(a.stages.size(), b.stages.size());
    for (std::size_t t = 0; t < a.stages.size(); ++t) {
        EXPECT_TRUE(a.stages[t].global.weights == b.stages[t].global.weights);
        EXPECT_EQ(a.stages[t].global.mu, b.stages[t].global.mu);
        const auto& fa = a.stages[t].local.forests;
        const auto& fb = b.stages[t].local.forests;
        ASSERT_EQ(fa.size(), fb.size());
        for (std::size_t l = 0; l < fa.size(); ++l) {
            for (std::size_t k = 0; k < fa[l].size(); ++k) {
                EXPECT_EQ(fa[l][k].leaf_offsets, fb[l][k].leaf_offsets);
                ASSERT_EQ(fa[l][k].splits.size(), fb[l][k].splits.size());
                for (std::size_t s = 0; s < fa[l][k].splits.size(); ++s) {
                    EXPECT_EQ(fa[l][k].splits[s].a, fb[l][k].splits[s].a);
                    EXPECT_EQ(fa[l][k].splits[s].b, fb[l][k].splits[s].b);
                    EXPECT_EQ(fa[l][k].splits[s].threshold, fb[l][k].splits[s].threshold);
                }
            }
        }
    }
}

} // namespace

TEST(Container, BinaryRoundTripIsBitExact)
{
    const auto& f = fixture();
    const ModelContainer c{f.cascade.features, f.cascade, f.classifiers, f.geometry};
    const std::string bytes = serialize_container(c);
    EXPECT_EQ(bytes.substr(0, 4), "LSRM");
    EXPECT_EQ(bytes.substr(bytes.size() - 12, 4), "END!");
    const auto back = deserialize_container(bytes);
    ASSERT_TRUE(back.cascade && back.classifiers && back.geometry);
    expect_same_cascade(*back.cascade, f.cascade);
    EXPECT_EQ(*back.classifiers, f.classifiers);
    EXPECT_EQ(*back.geometry, f.geometry);
    EXPECT_EQ(serialize_container(back), bytes);

    const auto dir = scratch("container");
    save_container(dir / "m.lsrm", c);
    EXPECT_EQ(slurp(dir / "m.lsrm"), bytes);
    const auto model = load_model(dir / "m.lsrm");
    const auto face = synthesize_face(synth_config(12, 2), 11);
    EXPECT_EQ(predict(model, face.image, face.bbox), predict(f.cascade, face.image, face.bbox));
}

TEST(Container, ValidatorsOnlyFile)
{
    const auto& f = fixture();
    const ModelContainer c{f.cascade.features, std::nullopt, f.classifiers, f.geometry};
    const auto back = deserialize_container(serialize_container(c));
    EXPECT_FALSE(back.cascade);
    EXPECT_EQ(*back.classifiers, f.classifiers);
    const auto dir = scratch("validators_only");
    save_container(dir / "v.lsrm", c);
    EXPECT_THROW(load_model(dir / "v.lsrm"), MalformedFile);
}

TEST(Container, RejectsCorruptBytes)
{
    const auto& f = fixture();
    const std::string bytes = serialize_container({f.cascade.features, f.cascade, {}, {}});
    EXPECT_THROW(deserialize_container(bytes.substr(0, bytes.size() / 2)), MalformedFile);
    std::string wrong = bytes;
    wrong[0] = 'X';
    EXPECT_THROW(deserialize_container(wrong), MalformedFile);
    std::string version = bytes;
    version[4] = 9;
    EXPECT_THROW(deserialize_container(version), MalformedFile);
    EXPECT_THROW(deserialize_container(bytes + "junk"), MalformedFile);
    EXPECT_THROW(deserialize_container(""), MalformedFile);
}

TEST(Container, JsonRoundTrip)
{
    const auto& f = fixture();
    const ModelContainer c{f.cascade.features, f.cascade, f.classifiers, f.geometry};
    const auto j = container_to_json(c);
    EXPECT_EQ(j.at("format"), "LSRM");
    const auto back = container_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(serialize_container(back), serialize_container(c));
}
