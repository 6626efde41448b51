#include <cmath>
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "helpers.hpp"
#include "pathrec/inverse.hpp"

using namespace pathrec;
using namespace pathrec::testing;

TEST_CASE("quadratic loss") {
    ImageSet a{Image::zeros(2, 2)}, b{Image::zeros(2, 2)};
    CHECK(loss(a, b) == 0.0);
    a[0].data = {1.0, 2.0, 3.0, 4.0};
    b[0].data = {1.0, 2.0, 3.0, 4.0};
    CHECK(loss(a, b) == 0.0);
    b[0].data[2] = 5.0;
    CHECK(loss(a, b) == doctest::Approx(0.5 * 4.0).epsilon(1e-14));
    ImageSet c{Image::zeros(3, 3)};
    CHECK_THROWS_AS(loss(a, c), std::invalid_argument);
    CHECK_THROWS_AS(loss(a, ImageSet{}), std::invalid_argument);
}

TEST_CASE("adam updates") {
    SUBCASE("zero gradient leaves the iterate fixed") {
        OptState st;
        st.params.beta = {1.0, 2.0, 3.0};
        SparseGradient g;
        adam_step(st, g, {});
        CHECK(st.t == 1);
        CHECK(st.params.beta == std::vector<double>{1.0, 2.0, 3.0});
    }
    SUBCASE("constant gradient moves by alpha in the gradient's direction") {
        OptState st;
        st.params.beta = {5.0, 5.0};
        SparseGradient g;
        g.add(0, 3.0);
        g.add(1, -0.002);
        AdamConfig cfg;
        cfg.alpha = 0.1;
        adam_step(st, g, cfg);
        // First step: mhat / sqrt(vhat) = sign(g) up to the eps guard.
        CHECK(st.params.beta[0] == doctest::Approx(5.0 - 0.1).epsilon(1e-6));
        CHECK(st.params.beta[1] == doctest::Approx(5.0 + 0.1).epsilon(1e-4));
    }
    SUBCASE("nonnegativity projection clamps extinction") {
        OptState st;
        st.params.beta = {0.01};
        SparseGradient g;
        g.add(0, 1.0);
        AdamConfig cfg;
        cfg.alpha = 1.0;
        adam_step(st, g, cfg);
        CHECK(st.params.beta[0] == 0.0);
        // And can be disabled.
        OptState st2;
        st2.params.beta = {0.01};
        cfg.project_nonneg = false;
        adam_step(st2, g, cfg);
        CHECK(st2.params.beta[0] < 0.0);
    }
    SUBCASE("phong parameters are boxed and per-unknown scales apply") {
        OptState st;
        st.params.kappa_s = 0.95;
        st.params.gamma = 10.0;
        SparseGradient g;
        g.kind = SparseGradient::Kind::Phong;
        g.add(0, -1.0);  // pushes kappa up, clamps at 1
        g.add(1, -1.0);  // pushes gamma up by alpha * scale
        AdamConfig cfg;
        cfg.alpha = 0.1;
        cfg.step_scale = {1.0, 50.0};
        adam_step(st, g, cfg);
        CHECK(st.params.kappa_s == 1.0);
        CHECK(st.params.gamma == doctest::Approx(15.0).epsilon(1e-6));
        // Gamma never drops below zero.
        OptState st2;
        st2.params.kappa_s = 0.5;
        st2.params.gamma = 0.05;
        SparseGradient g2;
        g2.kind = SparseGradient::Kind::Phong;
        g2.add(1, 1.0);
        adam_step(st2, g2, cfg);
        CHECK(st2.params.gamma == 0.0);
    }
    SUBCASE("moments decay as textbook adam") {
        OptState st;
        st.params.beta = {0.0};
        AdamConfig cfg;
        cfg.alpha = 0.0;  // observe moments only
        SparseGradient g;
        g.add(0, 2.0);
        adam_step(st, g, cfg);
        adam_step(st, g, cfg);
        CHECK(st.m1[0] == doctest::Approx(0.9 * (0.1 * 2.0) + 0.1 * 2.0).epsilon(1e-12));
        CHECK(st.m2[0] ==
              doctest::Approx(0.999 * (0.001 * 4.0) + 0.001 * 4.0).epsilon(1e-12));
    }
}

TEST_CASE("quality metrics") {
    CHECK(metrics({1.0, 2.0}, {1.0, 2.0}).eps == 0.0);
    CHECK(metrics({1.0, 2.0}, {1.0, 2.0}).delta == 0.0);
    auto m = metrics({0.0, 0.0}, {1.0, 3.0});
    CHECK(m.eps == doctest::Approx(1.0));
    CHECK(m.delta == doctest::Approx(1.0));  // all mass missing
    // Overestimated mass is a negative bias.
    CHECK(metrics({2.0, 6.0}, {1.0, 3.0}).delta == doctest::Approx(-1.0));
    CHECK(metrics({2.0, 2.0}, {1.0, 3.0}).eps == doctest::Approx(0.5));
    CHECK_THROWS_AS(metrics({1.0}, {1.0, 2.0}), std::invalid_argument);
    CHECK_THROWS_AS(metrics({1.0}, {0.0}), std::invalid_argument);
}

TEST_CASE("block downsampling") {
    ImageSet im{Image::zeros(4, 4)};
    for (int i = 0; i < 16; ++i) im[0].data[static_cast<size_t>(i)] = i;
    auto coarse = downsample_images(im, 2, 2);
    REQUIRE(coarse[0].rows == 2);
    CHECK(coarse[0].at(0, 0) == doctest::Approx(0 + 1 + 4 + 5));
    CHECK(coarse[0].at(0, 1) == doctest::Approx(2 + 3 + 6 + 7));
    CHECK(coarse[0].at(1, 0) == doctest::Approx(8 + 9 + 12 + 13));
    CHECK(coarse[0].at(1, 1) == doctest::Approx(10 + 11 + 14 + 15));
    // Total mass is preserved.
    double fine_sum = 0.0, coarse_sum = 0.0;
    for (double v : im[0].data) fine_sum += v;
    for (double v : coarse[0].data) coarse_sum += v;
    CHECK(fine_sum == doctest::Approx(coarse_sum));
    // Identity when shapes already match.
    auto same = downsample_images(im, 4, 4);
    CHECK(same[0].data == im[0].data);
}

TEST_CASE("space carving") {
    Scene s = two_species_cube(std::vector<double>(64, 3.0), 4, 0.04, 8, 8);
    Detector side = s.detectors[0];
    side.position = {3.0, 0.5, 0.5};
    side.direction = {-1.0, 0.0, 0.0};
    side.up = {0.0, 0.0, 1.0};
    s.detectors.push_back(side);
    s.finalize();

    SUBCASE("dark images carve everything away") {
        ImageSet gt{Image::zeros(8, 8), Image::zeros(8, 8)};
        auto c = space_carve(s, gt, 0.05, 2.0);
        for (uint8_t m : c.mask) CHECK(m == 0);
    }
    SUBCASE("uniformly bright images keep every projected voxel") {
        ImageSet gt{Image::zeros(8, 8), Image::zeros(8, 8)};
        for (auto& im : gt)
            for (auto& px : im.data) px = 1.0;
        auto c = space_carve(s, gt, 0.05, 2.0);
        int occupied = 0;
        for (size_t v = 0; v < c.mask.size(); ++v)
            if (c.mask[v]) {
                ++occupied;
                CHECK(c.initial.beta[v] == 2.0);
            }
        CHECK(occupied == 64);  // the whole cube is inside both frustums
    }
    SUBCASE("a dark half-view carves the hidden half") {
        ImageSet gt{Image::zeros(8, 8), Image::zeros(8, 8)};
        for (auto& px : gt[0].data) px = 1.0;
        // Second view: only the upper image half (top of the cube) is bright.
        for (int r = 0; r < 4; ++r)
            for (int cc = 0; cc < 8; ++cc) gt[1].at(r, cc) = 1.0;
        auto c = space_carve(s, gt, 0.05, 2.0);
        const GridGeometry* g = s.grid();
        int hi = 0, lo = 0;
        for (int v = 0; v < g->voxel_count(); ++v) {
            if (!c.mask[static_cast<size_t>(v)]) continue;
            if (g->voxel_center(v).z > 0.5)
                ++hi;
            else
                ++lo;
        }
        CHECK(hi > 0);
        CHECK(lo == 0);
    }
    SUBCASE("needs two views") {
        Scene one = two_species_cube(std::vector<double>(64, 3.0), 4);
        ImageSet gt{Image::zeros(8, 8)};
        CHECK_THROWS_AS(space_carve(one, gt, 0.05, 2.0), std::invalid_argument);
    }
}

TEST_CASE("reconstruction loop bookkeeping") {
    Scene s = two_species_cube(std::vector<double>(8, 3.0), 2, 0.04, 6, 6);
    auto gt = render(s, {.n_paths = 8000, .seed = 555}).images;
    ParamSet init;
    init.beta.assign(8, 2.5);

    SUBCASE("sampling phases follow ceil(T / N_r)") {
        ReconstructOptions opt;
        opt.adam.alpha = 0.0;
        opt.schedule.max_iterations = 10;
        opt.schedule.recycle_period = 3;
        opt.schedule.stages = {{0, 0, 500}};
        auto r = reconstruct(s, gt, init, opt);
        CHECK(r.sampling_phases == 4);
        CHECK(r.history.size() == 10);
        opt.schedule.recycle_period = 1;
        CHECK(reconstruct(s, gt, init, opt).sampling_phases == 10);
        opt.schedule.recycle_period = 30;
        CHECK(reconstruct(s, gt, init, opt).sampling_phases == 1);
    }
    SUBCASE("stage changes happen only at resample boundaries") {
        ReconstructOptions opt;
        opt.adam.alpha = 0.0;
        opt.schedule.max_iterations = 12;
        opt.schedule.recycle_period = 4;
        opt.schedule.stages = {{3, 3, 400}, {6, 6, 400}};
        opt.schedule.saturation_window = 2;
        opt.schedule.saturation_rel_improvement = 1.0;  // saturate immediately
        auto r = reconstruct(s, gt, init, opt);
        int last = 0;
        for (const auto& row : r.history) {
            if (row.stage != last) {
                CHECK(row.iter % 4 == 0);
                CHECK(row.stage == last + 1);
                last = row.stage;
            }
        }
        CHECK(last == 1);
    }
    SUBCASE("gradient descent reduces the loss on an easy problem") {
        ReconstructOptions opt;
        opt.adam.alpha = 0.05;
        opt.schedule.max_iterations = 16;
        opt.schedule.recycle_period = 4;
        opt.schedule.stages = {{0, 0, 4000}};
        opt.seed = 77;
        ParamSet truth;
        truth.beta.assign(8, 3.0);
        opt.truth = &truth;
        auto r = reconstruct(s, gt, init, opt);
        CHECK(r.history.back().loss < r.history.front().loss);
        CHECK(r.history.back().eps < r.history.front().eps);
        // eps starts at |3 - 2.5| / 3.
        CHECK(r.history.front().eps == doctest::Approx(0.5 / 3.0).epsilon(1e-12));
    }
    SUBCASE("checkpoints are written") {
        namespace fs = std::filesystem;
        const std::string dir = "test_ckpt_dir";
        fs::create_directories(dir);
        ReconstructOptions opt;
        opt.adam.alpha = 0.01;
        opt.schedule.max_iterations = 4;
        opt.schedule.recycle_period = 2;
        opt.schedule.stages = {{0, 0, 300}};
        opt.schedule.checkpoint_every = 2;
        opt.checkpoint_dir = dir;
        reconstruct(s, gt, init, opt);
        CHECK(fs::exists(dir + "/checkpoint_1.vgrd"));
        CHECK(fs::exists(dir + "/checkpoint_3.vgrd"));
        CHECK(fs::exists(dir + "/loss.csv"));
        fs::remove_all(dir);
    }
    SUBCASE("empty schedules are rejected") {
        ReconstructOptions opt;
        CHECK_THROWS_AS(reconstruct(s, gt, init, opt), std::invalid_argument);
    }
}

TEST_CASE("reconstruction improves a phong surface") {
    Scene s = phong_box(0.7, 50.0, 8, 8);
    auto gt = render(s, {.n_paths = 20000, .seed = 303, .max_bounces = 40}).images;
    Scene guess = s;
    guess.surfaces[0].brdf = Brdf::make_phong(0.45, 30.0);
    ParamSet init;
    init.kappa_s = 0.45;
    init.gamma = 30.0;
    ReconstructOptions opt;
    opt.adam.alpha = 0.03;
    opt.adam.step_scale = {1.0, 250.0};
    opt.schedule.max_iterations = 12;
    opt.schedule.recycle_period = 4;
    opt.schedule.stages = {{0, 0, 8000}};
    opt.seed = 909;
    auto r = reconstruct(guess, gt, init, opt);
    CHECK(r.history.back().loss < r.history.front().loss);
    CHECK(std::abs(r.params.kappa_s - 0.7) < std::abs(0.45 - 0.7));
}
