import math


class Point:
    def __init__(self, x, y):
        self.x = x
        self.y = y

    def distance(self, other):
        dx = self.x - other.x
        dy = self.y - other.y
        return math.hypot(dx, dy)


def centroid(points):
    if not points:
        raise ValueError("no points")
    sx = sum(p.x for p in points)
    sy = sum(p.y for p in points)
    return Point(sx / len(points), sy / len(points))


def perimeter(points):
    total = 0.0
    for i in range(len(points)):
        total += points[i].distance(points[(i + 1) % len(points)])
    return total
