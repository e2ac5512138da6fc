package com.beta;

import com.beta.util.MathUtil;

public class App {
    public static void main(String[] args) {
        Matrix m = new Matrix(2, 2);
        m.set(0, 0, 3);
        m.set(1, 1, 4);
        Matrix sum = m.plus(m);
        int total = MathUtil.add(sum.get(0, 0), sum.get(1, 1));
        if (total > 10) {
            System.out.println("large " + total);
        } else {
            System.out.println("small " + total);
        }
        System.out.println(sum.rowMean(0));
    }
}
