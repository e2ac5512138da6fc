#ifndef GEOM_H
#define GEOM_H

#include <vector>

struct Vec2 {
    double x;
    double y;
};

// Dot product of two vectors.
double dot(const Vec2& a, const Vec2& b);

// Euclidean length.
double length(const Vec2& v);

Vec2 normalize(const Vec2& v);

double polygon_area(const std::vector<Vec2>& pts);

#endif
