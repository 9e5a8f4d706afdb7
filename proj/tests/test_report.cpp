// Copyright (c) 2026, The selfanno Authors. All rights reserved.
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


#include <regex>
#include <string>

#include <gtest/gtest.h>

#include "selfanno/errors.hpp"
#include "selfanno/report.hpp"
#include "selfanno/selfloop.hpp"
#include "test_support.hpp"

using namespace selfanno;
using selfanno::testing::TempDir;

namespace {

const char *kHeader = "iteration,ap75,ar75,n_detected,n_gt,promoted,wall_ms\n";

double attr(const std::string &svg, const std::string &element_id, const std::string &name) {
  const std::regex tag("<[a-z]+ id=\"" + element_id + "\"[^>]*>");
  std::smatch m;
  if (!std::regex_search(svg, m, tag)) return -1;
  const std::string t = m.str();
  const std::regex a(" " + name + "=\"([-0-9.]+)\"");
  std::smatch v;
  if (!std::regex_search(t, v, a)) return -1;
  return std::stod(v[1].str());
}

std::vector<std::pair<double, double>> points(const std::string &svg, const std::string &element_id) {
  const std::regex tag("<polyline id=\"" + element_id + "\" points=\"([^\"]*)\"");
  std::smatch m;
  std::vector<std::pair<double, double>> out;
  if (!std::regex_search(svg, m, tag)) return out;
  std::stringstream ss(m[1].str());
  std::string pt;
  while (ss >> pt) {
    const auto comma = pt.find(',');
    out.emplace_back(std::stod(pt.substr(0, comma)), std::stod(pt.substr(comma + 1)));
  }
  return out;
}

}  // namespace

TEST(MetricsCsvParse, RoundTripsWriterOutput) {
  std::vector<IterationRecord> h(2);
  h[0].iteration = 0;
  h[1].iteration = 1;
  h[1].promoted = 7;
  MetricsRecord m;
  m.ap75 = 0.5;
  m.ar75 = 0.625;
  m.n_detected_instances = 3;
  m.n_ground_truth = 4;
  h[1].metrics = m;
  const auto rows = parse_metrics_csv(metrics_csv(h));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_FALSE(rows[0].ap75.has_value());
  EXPECT_EQ(rows[1].ap75, 0.5);
  EXPECT_EQ(rows[1].ar75, 0.625);
  EXPECT_EQ(rows[1].n_detected, 3u);
  EXPECT_EQ(rows[1].n_gt, 4u);
  EXPECT_EQ(rows[1].promoted, 7u);
  EXPECT_THROW(parse_metrics_csv("x,y\n"), MissingMetricsError);
  EXPECT_THROW(parse_metrics_csv(std::string(kHeader) + "1,2\n"), ParseError);
  EXPECT_THROW(parse_metrics_csv(std::string(kHeader) + "a,0.1,0.1,1,1,0,0\n"), ParseError);
}

TEST(ReportSvg, GroundTruthLineSitsBetweenCrossingPoints) {
  const std::string csv = std::string(kHeader) +
                          "0,0.200000,0.300000,10,30,0,0\n"
                          "1,0.400000,0.500000,25,30,20,0\n"
                          "2,0.500000,0.600000,40,30,35,0\n";
  const auto svg = render_report_svg(parse_metrics_csv(csv));
  const double y1 = attr(svg, "gt-line", "y1"), y2 = attr(svg, "gt-line", "y2");
  ASSERT_GT(y1, 0);
  EXPECT_EQ(y1, y2);
  EXPECT_NE(svg.find("stroke-dasharray=\"8,4\""), std::string::npos);
  const auto det = points(svg, "detected");
  ASSERT_EQ(det.size(), 3u);
  // svg y grows downwards: 25 < 30 < 40 detections
  EXPECT_GT(y1, det[2].second);
  EXPECT_LT(y1, det[1].second);
  // linear axis: gt sits at 1/3 of the way from 25 to 40
  EXPECT_NEAR(y1, det[1].second + (det[2].second - det[1].second) * (30.0 - 25.0) / (40.0 - 25.0), 0.02);
  EXPECT_EQ(points(svg, "ap75").size(), 3u);
  EXPECT_EQ(points(svg, "ar75").size(), 3u);
}

TEST(ReportSvg, SingleRowGivesOnePointEach) {
  const auto svg = render_report_svg(parse_metrics_csv(std::string(kHeader) + "0,0.900000,0.800000,12,12,0,0\n"));
  EXPECT_EQ(points(svg, "ap75").size(), 1u);
  EXPECT_EQ(points(svg, "ar75").size(), 1u);
  EXPECT_EQ(points(svg, "detected").size(), 1u);
  EXPECT_GT(attr(svg, "gt-line", "y1"), 0);
}

TEST(ReportSvg, ScoresArePercentages) {
  const auto svg = render_report_svg(parse_metrics_csv(std::string(kHeader) +
                                                       "0,0.000000,0.000000,0,5,0,0\n1,1.000000,0.500000,5,5,5,0\n"));
  const auto ap = points(svg, "ap75"), ar = points(svg, "ar75");
  // 0 % at the panel floor, 100 % at its top, 50 % halfway
  EXPECT_NEAR(ar[1].second, (ap[0].second + ap[1].second) / 2, 0.01);
}

TEST(RenderReport, WritesFilesDeterministically) {
  TempDir tmp("report");
  loop_detail::write_text(tmp.path() / "metrics.csv", std::string(kHeader) +
                                                          "0,0.500000,0.400000,10,12,0,0\n"
                                                          "1,0.750000,0.700000,11,12,9,0\n"
                                                          "2,0.625000,0.700000,13,12,10,0\n");
  render_report(tmp.path());
  const auto svg = loop_detail::read_text(tmp.path() / "report.svg");
  const auto summary = loop_detail::read_text(tmp.path() / "summary.txt");
  EXPECT_NE(summary.find("best iteration: 1"), std::string::npos);
  EXPECT_NE(summary.find("AP75: 75.0 %"), std::string::npos);
  render_report(tmp.path());
  EXPECT_EQ(loop_detail::read_text(tmp.path() / "report.svg"), svg);
  EXPECT_EQ(loop_detail::read_text(tmp.path() / "summary.txt"), summary);
}

TEST(RenderReport, MissingMetrics) {
  TempDir tmp("report");
  EXPECT_THROW(render_report(tmp.path()), MissingMetricsError);
  loop_detail::write_text(tmp.path() / "metrics.csv", kHeader);
  EXPECT_THROW(render_report(tmp.path()), MissingMetricsError);
  loop_detail::write_text(tmp.path() / "metrics.csv", std::string(kHeader) + "0,,,,,0,0\n");
  EXPECT_THROW(render_report(tmp.path()), MissingMetricsError);
}
