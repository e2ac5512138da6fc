package com.beta.util;

/** Small arithmetic helpers. */
public final class MathUtil {
    private MathUtil() {}

    /** Adds two integers, saturating at the int range. */
    public static int add(int a, int b) {
        long sum = (long) a + (long) b;
        if (sum > Integer.MAX_VALUE) {
            return Integer.MAX_VALUE;
        }
        if (sum < Integer.MIN_VALUE) {
            return Integer.MIN_VALUE;
        }
        return (int) sum;
    }

    public static int clamp(int value, int low, int high) {
        return Math.max(low, Math.min(high, value));
    }

    public static double mean(int[] values) {
        if (values.length == 0) {
            return 0.0;
        }
        long total = 0;
        for (int v : values) {
            total += v;
        }
        return (double) total / values.length;
    }
}
