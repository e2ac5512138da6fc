package main

import (
	"fmt"

	"kappa/stack"
)

func main() {
	s := stack.New()
	for i := 0; i < 5; i++ {
		s.Push(i * i)
	}
	for s.Len() > 0 {
		v, err := s.Pop()
		if err != nil {
			fmt.Println("error:", err)
			break
		}
		fmt.Println(v)
	}
}
