#include <iostream>
#include <vector>

#include "../include/geom.h"

int main() {
    std::vector<Vec2> square = {{0, 0}, {2, 0}, {2, 2}, {0, 2}};
    double area = polygon_area(square);
    Vec2 diag = normalize(Vec2{2.0, 2.0});
    double d = dot(diag, Vec2{1.0, 0.0});
    if (area > 1.0) {
        std::cout << "area " << area << std::endl;
    }
    for (const Vec2& p : square) {
        std::cout << length(p) << " ";
    }
    std::cout << d << std::endl;
    return 0;
}
