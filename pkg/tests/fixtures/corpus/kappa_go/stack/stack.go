package stack

import "errors"

var ErrEmpty = errors.New("stack is empty")

type Stack struct {
	items []int
}

func New() *Stack {
	return &Stack{items: make([]int, 0, 8)}
}

func (s *Stack) Push(v int) {
	s.items = append(s.items, v)
}

func (s *Stack) Pop() (int, error) {
	if len(s.items) == 0 {
		return 0, ErrEmpty
	}
	v := s.items[len(s.items)-1]
	s.items = s.items[:len(s.items)-1]
	return v, nil
}

func (s *Stack) Len() int {
	return len(s.items)
}
